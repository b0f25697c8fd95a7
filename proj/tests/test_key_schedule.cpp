#include <doctest.h>

#include <random>
#include <set>

#include "tls13/key_schedule.hpp"

using namespace tls13;

namespace {

// The zeros-PSK / zeros-ECDHE chain pinned from tests/oracle/tls13_oracle.py,
// with every checkpoint transcript hash set to Hash("").
struct ChainVectors {
    const char* early;
    const char* ext_binder;
    const char* res_binder;
    const char* handshake;
    const char* c_hs;
    const char* s_hs;
    const char* master;
    const char* c_ap;
    const char* s_ap;
    const char* exporter;
    const char* resumption;
    const char* c_fin_key;
    const char* s_fin_key;
};

constexpr ChainVectors sha256_chain = {
    "33ad0a1c607ec03b09e6cd9893680ce210adf300aa1f2660e1b22e10f170f92a",
    "8fa31e7b3844748675c3a4728ba01c382ebd0c5f64cc6bee56c863982624c3e2",
    "feb866868b62f7e0d14c2547bae6c86d16c6db9d7e8af4e4ba1652b69fee9ba0",
    "97537f609b73c6c5497119c994aed73fb17084c0d00ea6aa097bab9c6d3968f9",
    "b87063ae154f8f6c937b6681c22264389bdf06d66a242104230c117fba97dd01",
    "f84fc753552160c0141fa671f6a73d4dfae2cfb17aab5a6879cb0bcfdb1c93b0",
    "706f76fd0fdfe16fd27d5919a41654e4eec527eb625aa331441a29e56dbfa573",
    "68de0dc693a36eaff2a7128f40b9a195d16cc4c39e7cac529832db8c53e9aa9b",
    "cd6794f6ff0750017be36800ca9e5412d1675ccd3391157567a6885ebc9e1d06",
    "4d74f116158278b5f55d696cf7b09ce77c6817ec616dc14647d1861981754cdf",
    "e658378f41cae41a7bda83a103a246b3ec0b9663a1609fedd9081b8ba2966c3b",
    "fc846728689f8274e65eea6117b93f096d4843fddf6c8dbe1e5d643b88be8a84",
    "9e2829627141da9aace9e75098cc8b164d386a0c8c2533a5eed5a4f11f79f34c",
};

constexpr ChainVectors sha384_chain = {
    "7ee8206f5570023e6dc7519eb1073bc4e791ad37b5c382aa10ba18e2357e716971f9362f2c2fe2a76bfd78dfec4ea9b5",
    "08f41b6439cb3ec19b027633b75a616e6a9d5ab7aee0efde11c4b5eb83f921bc5ddb68c3e1f8bdf1b996d05ba5a71007",
    "51069a579b404b6885ec66bd8fc96b477c2de324814b8f945459937f004c661cb533419e78789bd56551503b48217b73",
    "e80a66b5d08a3318ced2502a04a753fa870597fc65c8d55ef35bbbbe65eca89e291d68b160b74b9ce0ef353785f04406",
    "7a66e8a6e27f25bc864521db486923c4b5056c9ab469ed25730d6ddd5018000b945e7dc69b5a6cb8db9536ab8f22455c",
    "e6e4001038c54023664aaf21f45b4358c718dbd28ff0486e67a655e55ee0e5002095f1f518448f81f70c987d98b42e60",
    "408c8a4e37d6c0c93d952c109ed52d6fc8b85e086ed2dbaf277e5fe6995450e705153d9a5ec7efa75f04708fa4f8ab1f",
    "3128d0fcf6e29dda94433b7669ef518d6a3f7e32cd52506f12553e605ac5e6114a9125261337167397b77ac1f7595ba4",
    "5461aaeca338463c4d21208248fac43f1d0cb24f262c6247df4606f46029dcb255a0e88a1c6baf26d8d3629fa76138b8",
    "7a82695c3986b5ff7f0717d388974e65186e49bdf407e1e1f340c00758aa11d8befe8d393b29cd36a52085f39727c740",
    "a436480b49a93e0ac65c28ad0e8e29ad4f25bb7211a9966bcc021c5fbc153e426d84295fb0b8c0280134ab64451592e3",
    "50b906f252ba7f7cf729ee29a3c8f041b8aaa0eb986f35a11c411d0c35fe125763af4ddb869310f73c5c65f9187ccaa4",
    "0ee70cdc0abbe5863b7dbf7fa93c16325650cefc7fa8d856ee4e8e7356748c3f82f32c054ffa7ed42a27d6cde22eb297",
};

void check_chain(HashKind hk, const ChainVectors& v) {
    bytes empty_hash = hash(hk, {});
    bytes ecdhe_zeros(32, 0x00);  // a 32-byte shared secret regardless of hash

    KeySchedule ks(hk);
    CHECK(ks.stage() == KeySchedule::Stage::fresh);
    ks.derive_early(std::nullopt);
    CHECK(ks.stage() == KeySchedule::Stage::early);
    CHECK(to_hex(ks.current_secret()) == v.early);
    CHECK(to_hex(ks.binder_key(PskKind::external)) == v.ext_binder);
    CHECK(to_hex(ks.binder_key(PskKind::resumption)) == v.res_binder);

    ks.into_handshake(bytes_view(ecdhe_zeros));
    CHECK(to_hex(ks.current_secret()) == v.handshake);
    auto [c_hs, s_hs] = ks.handshake_traffic_secrets(empty_hash);
    CHECK(to_hex(c_hs.secret) == v.c_hs);
    CHECK(to_hex(s_hs.secret) == v.s_hs);
    CHECK(c_hs.sender == Sender::client);
    CHECK(s_hs.sender == Sender::server);

    ks.into_master();
    CHECK(to_hex(ks.current_secret()) == v.master);
    auto [c_ap, s_ap] = ks.application_traffic_secrets(empty_hash);
    CHECK(to_hex(c_ap.secret) == v.c_ap);
    CHECK(to_hex(s_ap.secret) == v.s_ap);
    auto [exporter, resumption] = ks.exporter_and_resumption_masters(empty_hash, empty_hash);
    CHECK(to_hex(exporter) == v.exporter);
    CHECK(to_hex(resumption) == v.resumption);

    CHECK(to_hex(finished_key(c_hs)) == v.c_fin_key);
    CHECK(to_hex(finished_key(s_hs)) == v.s_fin_key);
}

}  // namespace

TEST_CASE("figure-2 chain matches the oracle, sha256") {
    check_chain(HashKind::sha256, sha256_chain);
}

TEST_CASE("figure-2 chain matches the oracle, sha384") {
    check_chain(HashKind::sha384, sha384_chain);
}

TEST_CASE("stage transitions are the only path") {
    KeySchedule ks(HashKind::sha256);
    bytes th = hash(HashKind::sha256, {});
    CHECK_THROWS_AS(ks.into_handshake(std::nullopt), std::logic_error);
    CHECK_THROWS_AS(ks.binder_key(PskKind::external), std::logic_error);
    ks.derive_early(std::nullopt);
    CHECK_THROWS_AS(ks.derive_early(std::nullopt), std::logic_error);
    CHECK_THROWS_AS(ks.into_master(), std::logic_error);
    CHECK_THROWS_AS(ks.handshake_traffic_secrets(th), std::logic_error);
    ks.into_handshake(std::nullopt);
    CHECK_THROWS_AS(ks.application_traffic_secrets(th), std::logic_error);
    ks.into_master();
    CHECK_THROWS_AS(ks.into_master(), std::logic_error);
}

TEST_CASE("distinct PSKs give distinct early secrets") {
    bytes psk_a(32, 0x01);
    bytes psk_b(32, 0x02);
    KeySchedule a(HashKind::sha256);
    KeySchedule b(HashKind::sha256);
    a.derive_early(bytes_view(psk_a));
    b.derive_early(bytes_view(psk_b));
    CHECK(a.current_secret() != b.current_secret());
}

TEST_CASE("client early traffic secret is deterministic in its inputs") {
    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    bytes th = hash(HashKind::sha256, bytes{0x01, 0x02});
    auto s1 = ks.client_early_traffic_secret(th);
    auto s2 = ks.client_early_traffic_secret(th);
    CHECK(s1.secret == s2.secret);
    CHECK(s1.purpose == SecretPurpose::early);
    CHECK(to_hex(ks.client_early_traffic_secret(hash(HashKind::sha256, {})).secret) ==
          "0f57a9b0ef941613ebd40bf0747e999c4c280d5030e04b9cbd4d4b31093b425a");
}

TEST_CASE("traffic update walks generations with label traffic upd") {
    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    ks.into_handshake(std::nullopt);
    ks.into_master();
    auto [c_ap, s_ap] = ks.application_traffic_secrets(hash(HashKind::sha256, {}));

    auto gen1 = update_traffic_secret(c_ap);
    CHECK(gen1.generation == 1);
    CHECK(gen1.secret != c_ap.secret);
    auto gen2 = update_traffic_secret(gen1);
    CHECK(gen2.generation == 2);
    CHECK(gen2.secret != gen1.secret);

    // the label is "traffic upd" with the hash of the empty context
    auto manual = derive_secret(HashKind::sha256, c_ap.secret, "traffic upd",
                                hash(HashKind::sha256, {}));
    CHECK(manual == gen1.secret);

    TrafficSecret hs{Sender::client, SecretPurpose::handshake, 0, HashKind::sha256, c_ap.secret};
    CHECK_THROWS_AS(update_traffic_secret(hs), std::logic_error);
}

TEST_CASE("traffic keys match the negotiated AEAD geometry") {
    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    ks.into_handshake(bytes_view(bytes(32, 0x00)));
    auto [c_hs, s_hs] = ks.handshake_traffic_secrets(hash(HashKind::sha256, {}));

    auto keys128 = make_traffic_keys(c_hs, aead_descriptor(AeadKind::aes_128_gcm));
    CHECK(keys128.key.size() == 16);
    CHECK(keys128.iv.size() == 12);
    CHECK(to_hex(keys128.key) == "7caf96f5cde64ced792d5ef422f21e3f");
    CHECK(to_hex(keys128.iv) == "229ea3f685c69f018d461139");

    auto keys256 = make_traffic_keys(c_hs, aead_descriptor(AeadKind::aes_256_gcm));
    CHECK(keys256.key.size() == 32);
    CHECK(keys256.iv.size() == 12);

    auto chacha = make_traffic_keys(c_hs, aead_descriptor(AeadKind::chacha20_poly1305));
    CHECK(chacha.key.size() == 32);
    CHECK(chacha.iv.size() == 12);

    // distinct labels: the iv is not a prefix of the key stream
    CHECK(bytes(keys128.iv.begin(), keys128.iv.end()) !=
          bytes(keys256.key.begin(), keys256.key.begin() + 12));
}

TEST_CASE("verify_data has Hash.length and binds the finished key") {
    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    ks.into_handshake(bytes_view(bytes(32, 0x00)));
    auto [c_hs, s_hs] = ks.handshake_traffic_secrets(hash(HashKind::sha256, {}));
    bytes th = hash(HashKind::sha256, bytes{0xAB});
    auto fk = finished_key(s_hs);
    bytes vd = compute_verify_data(HashKind::sha256, fk, th);
    CHECK(vd.size() == 32);
    CHECK(vd != compute_verify_data(HashKind::sha256, finished_key(c_hs), th));
}

TEST_CASE("resumption PSKs change with the ticket nonce") {
    bytes master(32, 0x42);
    auto a = derive_resumption_psk(HashKind::sha256, master, bytes{0x00, 0x00});
    auto b = derive_resumption_psk(HashKind::sha256, master, bytes{0x00, 0x01});
    CHECK(a != b);
    CHECK(a.size() == 32);

    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    ks.into_handshake(bytes_view(bytes(32, 0x00)));
    ks.into_master();
    bytes empty_hash = hash(HashKind::sha256, {});
    auto [exporter, resumption] = ks.exporter_and_resumption_masters(empty_hash, empty_hash);
    CHECK(to_hex(derive_resumption_psk(HashKind::sha256, resumption, bytes{0x00, 0x00})) ==
          "989fe4f26b1be1f7e9eccb7d1ec9f009b9b7f7405471ab2ccb2874d75d25d2f3");
}

TEST_CASE("binder computes and verifies over the truncated transcript hash") {
    PreSharedKey psk;
    psk.secret.assign(32, 0x31);
    psk.kind = PskKind::resumption;
    psk.hash = HashKind::sha256;
    bytes th = hash(HashKind::sha256, bytes{0x01, 0x02, 0x03});

    bytes binder = compute_binder(psk, th);
    CHECK(binder.size() == 32);
    CHECK(verify_binder(psk, th, binder));

    bytes bad = binder;
    bad[3] ^= 0x01;
    CHECK_FALSE(verify_binder(psk, th, bad));

    PreSharedKey ext_psk = psk;
    ext_psk.kind = PskKind::external;
    CHECK(compute_binder(ext_psk, th) != binder);  // ext binder vs res binder
}

TEST_CASE("obfuscated age is addition modulo 2^32") {
    CHECK(obfuscate_ticket_age(0, 7) == 7);
    CHECK(obfuscate_ticket_age(0xFFFFFFFFu, 2) == 1);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        auto age = static_cast<uint32_t>(rng());
        auto add = static_cast<uint32_t>(rng());
        CHECK(deobfuscate_ticket_age(obfuscate_ticket_age(age, add), add) == age);
    }
}

TEST_CASE("no two derivations reuse a (secret, label, context) triple") {
    // run one chain and record every derive_secret/expand_label call shape
    std::set<std::string> triples;
    auto record = [&](bytes_view secret, std::string_view label, bytes_view ctx) {
        std::string key = to_hex(secret) + "|" + std::string(label) + "|" + to_hex(ctx);
        CHECK(triples.insert(key).second);
    };

    KeySchedule ks(HashKind::sha256);
    ks.derive_early(std::nullopt);
    bytes empty_hash = hash(HashKind::sha256, {});
    record(ks.current_secret(), "ext binder", empty_hash);
    ks.binder_key(PskKind::external);
    record(ks.current_secret(), "res binder", empty_hash);
    ks.binder_key(PskKind::resumption);
    record(ks.current_secret(), "derived", empty_hash);
    ks.into_handshake(bytes_view(bytes(32, 0x00)));
    bytes th_sh = hash(HashKind::sha256, bytes{0x02});
    record(ks.current_secret(), "c hs traffic", th_sh);
    record(ks.current_secret(), "s hs traffic", th_sh);
    auto [c_hs, s_hs] = ks.handshake_traffic_secrets(th_sh);
    record(ks.current_secret(), "derived", empty_hash);
    ks.into_master();
    bytes th_sf = hash(HashKind::sha256, bytes{0x03});
    bytes th_cf = hash(HashKind::sha256, bytes{0x04});
    record(ks.current_secret(), "c ap traffic", th_sf);
    record(ks.current_secret(), "s ap traffic", th_sf);
    auto [c_ap, s_ap] = ks.application_traffic_secrets(th_sf);
    record(ks.current_secret(), "exp master", th_sf);
    record(ks.current_secret(), "res master", th_cf);
    ks.exporter_and_resumption_masters(th_sf, th_cf);
    record(c_hs.secret, "key", {});
    record(c_hs.secret, "iv", {});
    record(s_hs.secret, "key", {});
    record(s_hs.secret, "iv", {});
    record(c_hs.secret, "finished", {});
    record(s_hs.secret, "finished", {});
    record(c_ap.secret, "key", {});
    record(c_ap.secret, "iv", {});
    record(s_ap.secret, "key", {});
    record(s_ap.secret, "iv", {});
    record(c_ap.secret, "traffic upd", empty_hash);
    update_traffic_secret(c_ap);
}
