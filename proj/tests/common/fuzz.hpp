#pragma once

// Header mutation fuzzing of the IDX and weight-file parsers.

#include <cstdint>
#include <exception>
#include <random>
#include <string>
#include <vector>

#include "cntnet/dataio.hpp"
#include "cntnet/errors.hpp"
#include "cntnet/train.hpp"

namespace fuzz {

using Bytes = std::vector<std::uint8_t>;

struct Tally {
    std::size_t cases = 0;
    std::size_t structured = 0;  // rejected with a cntnet::Error
    std::size_t accepted = 0;    // mutation happened to keep the input valid
    std::size_t unstructured = 0;
    std::string first_unstructured;
};

inline Bytes idx_seed(bool images) {
    Bytes b;
    auto be32 = [&](std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
    };
    if (images) {
        be32(cntnet::kIdxImagesMagic);
        be32(3);
        be32(28);
        be32(28);
        for (int i = 0; i < 3 * 784; ++i) b.push_back(static_cast<std::uint8_t>(i * 7));
    } else {
        be32(cntnet::kIdxLabelsMagic);
        be32(5);
        for (int i = 0; i < 5; ++i) b.push_back(static_cast<std::uint8_t>(i));
    }
    return b;
}

inline Bytes weights_seed() {
    const auto arch = cntnet::make_dense_network({6, 5, 3}, cntnet::Activation::Sigmoid, cntnet::Activation::Softmax).layers;
    return cntnet::write_weights(cntnet::init_gaussian(arch, 0.5, 1));
}

// Mutates the header region [0, header) of `b`: byte flips, random 32-bit
// words, digit edits, truncation and extension.
inline Bytes mutate(Bytes b, std::size_t header, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> op(0, 5);
    std::uniform_int_distribution<std::size_t> pos(0, header - 1);
    const int rounds = 1 + static_cast<int>(rng() % 4);
    for (int r = 0; r < rounds && !b.empty(); ++r) {
        const std::size_t p = pos(rng) % b.size();
        switch (op(rng)) {
            case 0: b[p] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
            case 1: b[p] = static_cast<std::uint8_t>(rng()); break;
            case 2:
                for (std::size_t i = 0; i < 4 && p + i < b.size(); ++i) b[p + i] = static_cast<std::uint8_t>(rng());
                break;
            case 3: b[p] = static_cast<std::uint8_t>("0123456789-.e\"{}[],:"[rng() % 20]); break;
            case 4: b.resize(rng() % (b.size() + 1)); break;
            case 5: b.insert(b.begin() + static_cast<std::ptrdiff_t>(p), static_cast<std::uint8_t>(rng())); break;
        }
    }
    return b;
}

template <class Parse>
void run_one(const Bytes& input, Parse parse, Tally& t) {
    ++t.cases;
    try {
        parse(input);
        ++t.accepted;
    } catch (const cntnet::Error&) {
        ++t.structured;
    } catch (const std::exception& e) {
        ++t.unstructured;
        if (t.first_unstructured.empty()) t.first_unstructured = e.what();
    }
}

// `cases` mutations in total, split across IDX images, IDX labels and weight files.
inline Tally run(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Bytes images = idx_seed(true), labels = idx_seed(false), weights = weights_seed();
    const std::size_t manifest = 8 + (weights[4] | weights[5] << 8 | weights[6] << 16 | std::size_t{weights[7]} << 24);
    Tally t;
    for (std::size_t i = 0; i < cases; ++i) {
        switch (i % 3) {
            case 0:
                run_one(mutate(images, 16, rng), [](const Bytes& b) { cntnet::parse_idx_images(b); }, t);
                break;
            case 1:
                run_one(mutate(labels, 8, rng), [](const Bytes& b) { cntnet::parse_idx_labels(b); }, t);
                break;
            case 2:
                run_one(mutate(weights, manifest, rng), [](const Bytes& b) { cntnet::read_weights(b); }, t);
                break;
        }
    }
    return t;
}

}  // namespace fuzz
