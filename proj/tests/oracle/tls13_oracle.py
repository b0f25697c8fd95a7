#!/usr/bin/env python3
"""Independent oracle for the TLS 1.3 engine test suite.

Everything here is written directly from the defining RFCs on top of
Python's stdlib hmac/hashlib, on purpose: it shares no code with the
C++ implementation it checks.

Subcommands (JSON on stdin, JSON on stdout):
  hkdf-batch   [{op, hash, ...}, ...]        -> [hex, ...]
  chain        {hash, psk?, ecdhe?, th_*}    -> {secret name: hex, ...}
  x25519       {scalar, point}               -> {shared: hex}
  pinned                                     -> prints the frozen unit-test vectors
"""

import hashlib
import hmac
import json
import sys

# ---------------------------------------------------------------------------
# HKDF (RFC 5869) with the TLS 1.3 labeling conventions (RFC 8446 §7.1)

def _h(name):
    return getattr(hashlib, name)

def hkdf_extract(hash_name, salt, ikm):
    digest_len = _h(hash_name)().digest_size
    if salt is None:
        salt = b"\x00" * digest_len
    return hmac.new(salt, ikm, _h(hash_name)).digest()

def hkdf_expand(hash_name, prk, info, length):
    digest_len = _h(hash_name)().digest_size
    if length > 255 * digest_len:
        raise ValueError("length too large")
    out = b""
    t = b""
    counter = 1
    while len(out) < length:
        t = hmac.new(prk, t + info + bytes([counter]), _h(hash_name)).digest()
        out += t
        counter += 1
    return out[:length]

def hkdf_label(label, context, length):
    full = b"tls13 " + label
    return (
        length.to_bytes(2, "big")
        + bytes([len(full)]) + full
        + bytes([len(context)]) + context
    )

def hkdf_expand_label(hash_name, secret, label, context, length):
    return hkdf_expand(hash_name, secret, hkdf_label(label, context, length), length)

def derive_secret(hash_name, secret, label, transcript_hash):
    digest_len = _h(hash_name)().digest_size
    return hkdf_expand_label(hash_name, secret, label, transcript_hash, digest_len)

# ---------------------------------------------------------------------------
# Full key-derivation chain (RFC 8446 §7.1 key schedule)

def key_chain(hash_name, psk, ecdhe, th_ch, th_sh, th_sfin, th_cfin):
    digest_len = _h(hash_name)().digest_size
    zeros = b"\x00" * digest_len
    empty_hash = _h(hash_name)(b"").digest()

    out = {}
    early = hkdf_extract(hash_name, None, psk if psk is not None else zeros)
    out["early_secret"] = early
    out["ext_binder_key"] = derive_secret(hash_name, early, b"ext binder", empty_hash)
    out["res_binder_key"] = derive_secret(hash_name, early, b"res binder", empty_hash)
    out["client_early_traffic_secret"] = derive_secret(hash_name, early, b"c e traffic", th_ch)
    out["early_exporter_master_secret"] = derive_secret(hash_name, early, b"e exp master", th_ch)

    hs_salt = derive_secret(hash_name, early, b"derived", empty_hash)
    handshake = hkdf_extract(hash_name, hs_salt, ecdhe if ecdhe is not None else zeros)
    out["handshake_secret"] = handshake
    c_hs = derive_secret(hash_name, handshake, b"c hs traffic", th_sh)
    s_hs = derive_secret(hash_name, handshake, b"s hs traffic", th_sh)
    out["client_handshake_traffic_secret"] = c_hs
    out["server_handshake_traffic_secret"] = s_hs

    master_salt = derive_secret(hash_name, handshake, b"derived", empty_hash)
    master = hkdf_extract(hash_name, master_salt, zeros)
    out["master_secret"] = master
    out["client_application_traffic_secret_0"] = derive_secret(hash_name, master, b"c ap traffic", th_sfin)
    out["server_application_traffic_secret_0"] = derive_secret(hash_name, master, b"s ap traffic", th_sfin)
    out["exporter_master_secret"] = derive_secret(hash_name, master, b"exp master", th_sfin)
    out["resumption_master_secret"] = derive_secret(hash_name, master, b"res master", th_cfin)

    out["client_finished_key"] = hkdf_expand_label(hash_name, c_hs, b"finished", b"", digest_len)
    out["server_finished_key"] = hkdf_expand_label(hash_name, s_hs, b"finished", b"", digest_len)
    return out

def traffic_keys(hash_name, secret, key_len, iv_len):
    return (
        hkdf_expand_label(hash_name, secret, b"key", b"", key_len),
        hkdf_expand_label(hash_name, secret, b"iv", b"", iv_len),
    )

# ---------------------------------------------------------------------------
# X25519, straight from RFC 7748 §5

P25519 = 2**255 - 19
A24 = 121665

def _decode_u_coordinate(u):
    u = bytearray(u)
    u[31] &= 127
    return int.from_bytes(u, "little")

def _decode_scalar(k):
    k = bytearray(k)
    k[0] &= 248
    k[31] &= 127
    k[31] |= 64
    return int.from_bytes(k, "little")

def x25519(scalar_bytes, point_bytes):
    k = _decode_scalar(scalar_bytes)
    u = _decode_u_coordinate(point_bytes)
    x1 = u
    x2, z2 = 1, 0
    x3, z3 = u, 1
    swap = 0
    for t in reversed(range(255)):
        k_t = (k >> t) & 1
        swap ^= k_t
        if swap:
            x2, x3 = x3, x2
            z2, z3 = z3, z2
        swap = k_t
        a = (x2 + z2) % P25519
        aa = (a * a) % P25519
        b = (x2 - z2) % P25519
        bb = (b * b) % P25519
        e = (aa - bb) % P25519
        c = (x3 + z3) % P25519
        d = (x3 - z3) % P25519
        da = (d * a) % P25519
        cb = (c * b) % P25519
        x3 = (da + cb) % P25519
        x3 = (x3 * x3) % P25519
        z3 = (da - cb) % P25519
        z3 = (z3 * z3) % P25519
        z3 = (z3 * x1) % P25519
        x2 = (aa * bb) % P25519
        z2 = (e * ((aa + A24 * e) % P25519)) % P25519
    if swap:
        x2, x3 = x3, x2
        z2, z3 = z3, z2
    res = (x2 * pow(z2, P25519 - 2, P25519)) % P25519
    return res.to_bytes(32, "little")

X25519_BASE = (9).to_bytes(32, "little")

# ---------------------------------------------------------------------------
# Ed25519 verification, straight from RFC 8032 §5.1 (reference-style)

ED_P = 2**255 - 19
ED_L = 2**252 + 27742317777372353535851937790883648493
ED_D = -121665 * pow(121666, ED_P - 2, ED_P) % ED_P

def _ed_recover_x(y, sign):
    x2 = (y * y - 1) * pow(ED_D * y * y + 1, ED_P - 2, ED_P) % ED_P
    if x2 == 0:
        if sign:
            return None
        return 0
    x = pow(x2, (ED_P + 3) // 8, ED_P)
    if (x * x - x2) % ED_P != 0:
        x = x * pow(2, (ED_P - 1) // 4, ED_P) % ED_P
    if (x * x - x2) % ED_P != 0:
        return None
    if (x & 1) != sign:
        x = ED_P - x
    return x

def _ed_point_add(p, q):
    x1, y1, z1, t1 = p
    x2, y2, z2, t2 = q
    a = (y1 - x1) * (y2 - x2) % ED_P
    b = (y1 + x1) * (y2 + x2) % ED_P
    c = 2 * t1 * t2 * ED_D % ED_P
    d = 2 * z1 * z2 % ED_P
    e, f, g, h = b - a, d - c, d + c, b + a
    return (e * f % ED_P, g * h % ED_P, f * g % ED_P, e * h % ED_P)

def _ed_scalar_mul(s, p):
    q = (0, 1, 1, 0)
    while s > 0:
        if s & 1:
            q = _ed_point_add(q, p)
        p = _ed_point_add(p, p)
        s >>= 1
    return q

def _ed_decompress(data):
    y = int.from_bytes(data, "little")
    sign = y >> 255
    y &= (1 << 255) - 1
    if y >= ED_P:
        return None
    x = _ed_recover_x(y, sign)
    if x is None:
        return None
    return (x, y, 1, x * y % ED_P)

def _ed_compress(p):
    x, y, z, _ = p
    zinv = pow(z, ED_P - 2, ED_P)
    x = x * zinv % ED_P
    y = y * zinv % ED_P
    return (y | ((x & 1) << 255)).to_bytes(32, "little")

GY = 4 * pow(5, ED_P - 2, ED_P) % ED_P
GX = _ed_recover_x(GY, 0)
ED_G = (GX, GY, 1, GX * GY % ED_P)

def ed25519_verify(public, msg, sig):
    if len(sig) != 64 or len(public) != 32:
        return False
    a = _ed_decompress(public)
    r = _ed_decompress(sig[:32])
    if a is None or r is None:
        return False
    s = int.from_bytes(sig[32:], "little")
    if s >= ED_L:
        return False
    k = int.from_bytes(hashlib.sha512(sig[:32] + public + msg).digest(), "little") % ED_L
    lhs = _ed_scalar_mul(s, ED_G)
    rhs = _ed_point_add(r, _ed_scalar_mul(k, a))
    return _ed_compress(lhs) == _ed_compress(rhs)

# ---------------------------------------------------------------------------

def _hex(b):
    return b.hex()

def cmd_hkdf_batch():
    requests = json.load(sys.stdin)
    results = []
    for req in requests:
        op = req["op"]
        h = req["hash"]
        if op == "extract":
            salt = bytes.fromhex(req["salt"]) if req.get("salt") is not None else None
            results.append(_hex(hkdf_extract(h, salt, bytes.fromhex(req["ikm"]))))
        elif op == "expand":
            results.append(_hex(hkdf_expand(h, bytes.fromhex(req["prk"]),
                                            bytes.fromhex(req["info"]), req["length"])))
        elif op == "expand_label":
            results.append(_hex(hkdf_expand_label(h, bytes.fromhex(req["secret"]),
                                                  req["label"].encode(),
                                                  bytes.fromhex(req["context"]), req["length"])))
        elif op == "derive_secret":
            results.append(_hex(derive_secret(h, bytes.fromhex(req["secret"]),
                                              req["label"].encode(),
                                              bytes.fromhex(req["transcript_hash"]))))
        else:
            raise ValueError("unknown op " + op)
    json.dump(results, sys.stdout)

def cmd_chain():
    req = json.load(sys.stdin)
    h = req["hash"]
    psk = bytes.fromhex(req["psk"]) if req.get("psk") else None
    ecdhe = bytes.fromhex(req["ecdhe"]) if req.get("ecdhe") else None
    empty = _h(h)(b"").digest()
    th = {k: bytes.fromhex(req[k]) if req.get(k) else empty
          for k in ("th_ch", "th_sh", "th_sfin", "th_cfin")}
    out = key_chain(h, psk, ecdhe, th["th_ch"], th["th_sh"], th["th_sfin"], th["th_cfin"])
    if req.get("keys"):
        key_len, iv_len = req["key_len"], req["iv_len"]
        for name in ("client_handshake_traffic_secret", "server_handshake_traffic_secret",
                     "client_application_traffic_secret_0", "server_application_traffic_secret_0"):
            k, iv = traffic_keys(h, out[name], key_len, iv_len)
            out[name + "_key"] = k
            out[name + "_iv"] = iv
    json.dump({k: _hex(v) for k, v in out.items()}, sys.stdout)

def cmd_x25519():
    req = json.load(sys.stdin)
    shared = x25519(bytes.fromhex(req["scalar"]), bytes.fromhex(req["point"]))
    json.dump({"shared": _hex(shared)}, sys.stdout)

def cmd_ed25519_verify():
    req = json.load(sys.stdin)
    ok = ed25519_verify(bytes.fromhex(req["public"]), bytes.fromhex(req["message"]),
                        bytes.fromhex(req["signature"]))
    json.dump({"ok": ok}, sys.stdout)

def cmd_pinned():
    """Vectors frozen into the C++ unit tests; regenerate with care."""
    out = {}
    z32 = b"\x00" * 32
    out["extract_sha256_zeros"] = _hex(hkdf_extract("sha256", None, z32))
    out["extract_sha256_0b0c"] = _hex(hkdf_extract("sha256", b"\x0b" * 32, b"\x0c" * 32))
    prk = hkdf_extract("sha256", b"\x0b" * 32, b"\x0c" * 32)
    out["expand_sha256_test_42"] = _hex(hkdf_expand("sha256", prk, b"test", 42))
    out["expand_label_sha256_derived"] = _hex(hkdf_expand_label("sha256", z32, b"derived", b"", 32))
    early = hkdf_extract("sha256", None, z32)
    empty256 = hashlib.sha256(b"").digest()
    out["sha256_empty"] = _hex(empty256)
    out["sha384_empty"] = _hex(hashlib.sha384(b"").digest())
    out["derive_secret_early_derived"] = _hex(derive_secret("sha256", early, b"derived", empty256))

    chain256 = key_chain("sha256", None, z32, empty256, empty256, empty256, empty256)
    out["chain_sha256_zero_ecdhe"] = {k: _hex(v) for k, v in chain256.items()}
    chain384 = key_chain("sha384", None, z32,
                         hashlib.sha384(b"").digest(), hashlib.sha384(b"").digest(),
                         hashlib.sha384(b"").digest(), hashlib.sha384(b"").digest())
    out["chain_sha384_zero_ecdhe"] = {k: _hex(v) for k, v in chain384.items()}

    key, iv = traffic_keys("sha256", chain256["client_handshake_traffic_secret"], 16, 12)
    out["chain_sha256_c_hs_key"] = _hex(key)
    out["chain_sha256_c_hs_iv"] = _hex(iv)
    out["resumption_psk_nonce00"] = _hex(hkdf_expand_label(
        "sha256", chain256["resumption_master_secret"], b"resumption", b"\x00\x00", 32))

    scalar = bytes([0x42] + [0] * 31)
    pub = x25519(scalar, X25519_BASE)
    out["x25519_scalar42_public"] = _hex(pub)
    peer_scalar = bytes([0x99] + [0] * 31)
    peer_pub = x25519(peer_scalar, X25519_BASE)
    out["x25519_peer99_public"] = _hex(peer_pub)
    out["x25519_shared_42_99"] = _hex(x25519(scalar, peer_pub))

    json.dump(out, sys.stdout, indent=2)

def main():
    cmd = sys.argv[1] if len(sys.argv) > 1 else "pinned"
    dispatch = {
        "hkdf-batch": cmd_hkdf_batch,
        "chain": cmd_chain,
        "x25519": cmd_x25519,
        "ed25519-verify": cmd_ed25519_verify,
        "pinned": cmd_pinned,
    }
    dispatch[cmd]()

if __name__ == "__main__":
    main()
