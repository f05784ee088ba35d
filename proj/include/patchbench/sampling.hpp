#pragma once

// Seeded 8:1:1 splits, fraction samples and k-shot samples.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "instance.hpp"
#include "prng.hpp"

namespace patchbench {

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
    std::size_t source_count = 0;

    bool operator==(const DatasetSplit&) const = default;
};

/// Exact non-negative rational, num/den in lowest terms.
class Fraction {
  public:
    Fraction() = default;
    Fraction(std::uint64_t num, std::uint64_t den) {
        if (den == 0) throw sampling_error("fraction denominator is zero");
        const auto g = std::gcd(num, den);
        num_ = g ? num / g : 0;
        den_ = g ? den / g : 1;
    }

    /// Accepts "a/b" or a plain decimal such as "0.01".
    static Fraction parse(std::string_view text) {
        auto digits = [&](std::string_view s) {
            if (s.empty() || s.size() > 18) throw sampling_error("bad fraction '" + std::string(text) + "'");
            std::uint64_t v = 0;
            for (char c : s) {
                if (c < '0' || c > '9') throw sampling_error("bad fraction '" + std::string(text) + "'");
                v = v * 10 + static_cast<std::uint64_t>(c - '0');
            }
            return v;
        };
        if (auto slash = text.find('/'); slash != std::string_view::npos) {
            return Fraction(digits(text.substr(0, slash)), digits(text.substr(slash + 1)));
        }
        if (auto dot = text.find('.'); dot != std::string_view::npos) {
            const auto int_part = text.substr(0, dot);
            const auto frac_part = text.substr(dot + 1);
            std::uint64_t den = 1;
            for (std::size_t i = 0; i < frac_part.size(); ++i) den *= 10;
            const std::uint64_t whole = int_part.empty() ? 0 : digits(int_part);
            const std::uint64_t part = frac_part.empty() ? 0 : digits(frac_part);
            return Fraction(whole * den + part, den);
        }
        return Fraction(digits(text), 1);
    }

    std::uint64_t num() const noexcept { return num_; }
    std::uint64_t den() const noexcept { return den_; }
    double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const { return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_); }

    /// floor(this * n)
    std::uint64_t floor_times(std::uint64_t n) const noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(num_) * n) / den_);
    }

    bool operator==(const Fraction&) const = default;

  private:
    std::uint64_t num_ = 1;
    std::uint64_t den_ = 1;
};

enum class SamplingMode { fraction, shots };

inline const std::vector<std::uint64_t>& default_seeds() {
    static const std::vector<std::uint64_t> seeds{1, 2, 3};
    return seeds;
}

struct SamplingPlan {
    SamplingMode mode = SamplingMode::fraction;
    Fraction fraction{1, 1};
    std::size_t shot_count = 0;
    std::vector<std::uint64_t> seeds = default_seeds();
    std::optional<std::size_t> fixed_test_size;

    void validate() const {
        if (seeds.empty()) throw sampling_error("seed list is empty");
        std::unordered_set<std::uint64_t> s(seeds.begin(), seeds.end());
        if (s.size() != seeds.size()) throw sampling_error("seed list has duplicates");
        if (mode == SamplingMode::fraction && (fraction.num() == 0 || fraction.num() > fraction.den())) {
            throw sampling_error("fraction must lie in (0, 1]");
        }
        if (mode == SamplingMode::shots && shot_count == 0) throw sampling_error("shot count must be positive");
    }
};

inline std::vector<std::string> ids_of(const std::vector<RepairInstance>& items) {
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const auto& it : items) ids.push_back(it.id);
    return ids;
}

/// Shuffles ids, then val = next floor(N/10), test = next floor(N/10), train = rest.
inline DatasetSplit split_ids(const std::vector<std::string>& ids, std::uint64_t seed) {
    if (ids.size() < 10) throw split_error("need at least 10 instances to split, got " + std::to_string(ids.size()));
    const auto order = seeded_permutation(ids, seed, RngStream::split);
    const std::size_t tenth = ids.size() / 10;
    DatasetSplit s;
    s.seed = seed;
    s.source_count = ids.size();
    s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tenth));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(tenth), order.begin() + static_cast<std::ptrdiff_t>(2 * tenth));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * tenth), order.end());
    return s;
}

inline DatasetSplit split_dataset(const std::vector<RepairInstance>& instances, std::uint64_t seed) {
    return split_ids(ids_of(instances), seed);
}

/// First max(1, floor(fraction * N)) ids of a seeded shuffle, in shuffle order.
inline std::vector<std::string> sample_fraction(const std::vector<std::string>& ids, const Fraction& fraction,
                                                std::uint64_t seed) {
    if (ids.empty()) throw sampling_error("cannot sample from an empty id list");
    if (fraction.num() == 0 || fraction.num() > fraction.den()) throw sampling_error("fraction must lie in (0, 1]");
    const std::size_t take = std::max<std::size_t>(1, fraction.floor_times(ids.size()));
    auto order = seeded_permutation(ids, seed, RngStream::fraction);
    order.resize(take);
    return order;
}

/// Exactly k ids from a seeded shuffle. Draws for different k are independent.
inline std::vector<std::string> sample_shots(const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw sampling_error("shot count must be positive");
    if (k > ids.size()) {
        throw sampling_error("asked for " + std::to_string(k) + " shots from " + std::to_string(ids.size()) + " ids");
    }
    auto order = seeded_permutation(ids, seed, RngStream::shots);
    order.resize(k);
    return order;
}

struct ShotDraw {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Reserves a test set of test_size ids first, then draws k shots from what
/// is left, so the two never overlap.
inline ShotDraw reserve_then_shots(const std::vector<std::string>& ids, std::size_t k, std::size_t test_size,
                                   std::uint64_t seed) {
    if (k + test_size > ids.size()) {
        throw sampling_error("need " + std::to_string(k + test_size) + " ids for " + std::to_string(k) +
                             " shots plus a test set of " + std::to_string(test_size) + ", have " +
                             std::to_string(ids.size()));
    }
    const auto order = seeded_permutation(ids, seed, RngStream::test_reserve);
    ShotDraw d;
    d.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_size));
    const std::vector<std::string> rest(order.begin() + static_cast<std::ptrdiff_t>(test_size), order.end());
    d.train = sample_shots(rest, k, seed);
    return d;
}

inline void to_json(json& j, const DatasetSplit& s) {
    j = json{{"seed", s.seed}, {"source_count", s.source_count}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

inline void from_json(const json& j, DatasetSplit& s) {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.source_count = j.at("source_count").get<std::size_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
}

} // namespace patchbench
