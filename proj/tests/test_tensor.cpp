#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "talkhead/random.hpp"
#include "talkhead/tensor.hpp"

using namespace talkhead;

namespace {

std::string message_of(const std::string& bytes) {
    try {
        deserialize_weights(bytes);
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

WeightStore one_tensor_store() {
    WeightStore s;
    s.add("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    return s;
}

}  // namespace

TEST_CASE("empty store is a bare 16-byte header") {
    const std::string bytes = serialize_weights(WeightStore{});
    REQUIRE(bytes.size() == 16);
    CHECK(bytes.substr(0, 4) == "LSPW");
    CHECK(deserialize_weights(bytes).size() == 0);
}

TEST_CASE("one 2x3 tensor has the predicted size and round-trips") {
    const std::string bytes = serialize_weights(one_tensor_store());
    // header + u16 name length + "w" + dtype + rank + 2 dims + 6 floats
    CHECK(bytes.size() == 16 + 2 + 1 + 1 + 1 + 8 + 24);
    const WeightStore back = deserialize_weights(bytes);
    CHECK(back == one_tensor_store());
    const MatrixXf m = back.matrix("w", 2, 3);
    CHECK(m(0, 0) == 1.0f);
    CHECK(m(0, 2) == 3.0f);
    CHECK(m(1, 0) == 4.0f);
}

TEST_CASE("load errors") {
    const std::string good = serialize_weights(one_tensor_store());

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(contains(message_of(bad_magic), "bad magic"));

    CHECK(contains(message_of(good.substr(0, good.size() - 1)), "truncated"));
    CHECK(contains(message_of(good.substr(0, 10)), "truncated"));
    CHECK(contains(message_of(good + "x"), "trailing"));

    std::string version = good;
    version[4] = 9;
    CHECK(contains(message_of(version), "version"));

    std::string dtype = good;
    dtype[16 + 2 + 1] = 1;
    CHECK(contains(message_of(dtype), "dtype"));

    WeightStore two;
    two.add("a", Tensor({1}, {1}));
    two.add("b", Tensor({1}, {2}));
    std::string dup = serialize_weights(two);
    dup[16 + 13 + 2] = 'a';  // second record's name
    CHECK(contains(message_of(dup), "duplicate"));
}

TEST_CASE("store access errors") {
    WeightStore s = one_tensor_store();
    CHECK_THROWS_AS(s.add("w", Tensor({1}, {0})), DataError);
    CHECK_THROWS_AS(s.get("missing"), DataError);
    CHECK_THROWS_AS(s.matrix("w", 3, 2), DimensionError);
    CHECK_THROWS_AS(s.vector("w", 6), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
    s.set("w", Tensor({1}, {7}));
    CHECK(s.vector("w", 1)[0] == 7.0f);
    CHECK(s.size() == 1);
}

TEST_CASE("random stores round-trip bit-exactly") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        WeightStore s;
        const int n = static_cast<int>(rng.uniform() * 6);
        for (int t = 0; t < n; ++t) {
            std::vector<std::uint32_t> shape;
            const int rank = static_cast<int>(rng.uniform() * 4);
            for (int r = 0; r < rank; ++r) shape.push_back(static_cast<std::uint32_t>(rng.uniform() * 5));
            std::vector<float> data(shape_numel(shape));
            for (auto& v : data) {
                const std::uint32_t bits = static_cast<std::uint32_t>(rng.next_u64());
                std::memcpy(&v, &bits, 4);
            }
            s.add("t" + std::to_string(t) + std::string(static_cast<std::size_t>(rng.uniform() * 40), 'x'),
                  Tensor(shape, data));
        }
        const std::string bytes = serialize_weights(s);
        const WeightStore back = deserialize_weights(bytes);
        REQUIRE(back.size() == s.size());
        CHECK(serialize_weights(back) == bytes);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(back.entries()[i].first == s.entries()[i].first);
            CHECK(back.entries()[i].second.shape == s.entries()[i].second.shape);
            CHECK(std::memcmp(back.entries()[i].second.data.data(), s.entries()[i].second.data.data(),
                              4 * s.entries()[i].second.numel()) == 0);
        }
    }
}

TEST_CASE("weight files on disk") {
    const auto path = std::filesystem::temp_directory_path() / "talkhead_test_weights.bin";
    save_weights(one_tensor_store(), path);
    CHECK(std::filesystem::file_size(path) == 53);
    CHECK(load_weights(path) == one_tensor_store());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_weights(path), DataError);
}
