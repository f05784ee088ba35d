#pragma once

// Sentence-level BLEU and keyword-weighted n-gram recall over token lists,
// computed the way the reference CodeBLEU scorer computes its two lexical
// terms (one hypothesis, one reference).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace patchbench {

struct BleuOptions {
    int max_order = 4;
    double epsilon = 0.1;     // added to zero numerators before the log
    bool auto_reweigh = true; // hypotheses shorter than max_order use 1/len weights
    bool floor_weighted_denominator = false; // weighted unigram denominator is max(1, sum of weights)
};

/// How the keyword-weighted term picks the reference length for its
/// brevity penalty. The reference scorer measures the length of a
/// (tokens, weights) pair, i.e. always 2 (reference). reference_capped caps
/// that at the true length so identical one-token inputs still score 1.
enum class WeightedBrevity { reference, reference_capped, standard };

namespace detail {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

inline std::string ngram_key(const std::vector<std::string>& toks, std::size_t at, std::size_t n) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
        if (k) key += '\x1f';
        key += toks[at + k];
    }
    return key;
}

inline NgramCounts count_ngrams(const std::vector<std::string>& toks, std::size_t n) {
    NgramCounts c;
    if (toks.size() < n) return c;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) ++c[ngram_key(toks, i, n)];
    return c;
}

inline double brevity_penalty(double ref_len, double hyp_len) {
    if (hyp_len > ref_len) return 1.0;
    if (hyp_len == 0) return 0.0;
    return std::exp(1.0 - ref_len / hyp_len);
}

struct Ratio {
    double num = 0;
    double den = 1;
};

inline std::vector<double> order_weights(const BleuOptions& o, std::size_t hyp_len) {
    if (o.auto_reweigh && o.max_order == 4 && hyp_len > 0 && hyp_len < 4) {
        return std::vector<double>(hyp_len, 1.0 / static_cast<double>(hyp_len));
    }
    return std::vector<double>(static_cast<std::size_t>(o.max_order), 1.0 / o.max_order);
}

inline double combine(const std::vector<Ratio>& p, const std::vector<double>& w, double bp, double epsilon) {
    if (p.empty() || p[0].num == 0) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double num = p[i].num == 0 ? p[i].num + epsilon : p[i].num;
        s += w[i] * std::log(num / p[i].den);
    }
    return bp * std::exp(s);
}

} // namespace detail

/// Clipped n-gram precision with brevity penalty and add-epsilon smoothing.
inline double sentence_bleu(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference,
                            const BleuOptions& opts = {}) {
    if (opts.max_order < 1) throw error("BLEU max order must be at least 1");
    const auto weights = detail::order_weights(opts, hypothesis.size());
    std::vector<detail::Ratio> p;
    for (std::size_t n = 1; n <= weights.size(); ++n) {
        const auto hyp = detail::count_ngrams(hypothesis, n);
        const auto ref = detail::count_ngrams(reference, n);
        std::size_t clipped = 0, total = 0;
        for (const auto& [g, c] : hyp) {
            total += c;
            auto it = ref.find(g);
            if (it != ref.end()) clipped += std::min(c, it->second);
        }
        p.push_back({static_cast<double>(clipped), static_cast<double>(std::max<std::size_t>(1, total))});
    }
    const double bp = detail::brevity_penalty(static_cast<double>(reference.size()), static_cast<double>(hypothesis.size()));
    return detail::combine(p, weights, bp, opts.epsilon);
}

/// N-gram recall of the reference in the hypothesis, where reference
/// unigrams count with token_weight(t). Higher orders are unweighted.
inline double weighted_ngram_score(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference,
                                   const std::function<double(std::string_view)>& token_weight,
                                   const BleuOptions& opts = {},
                                   WeightedBrevity brevity = WeightedBrevity::reference_capped) {
    if (opts.max_order < 1) throw error("BLEU max order must be at least 1");
    const auto weights = detail::order_weights(opts, hypothesis.size());
    std::vector<detail::Ratio> p;
    for (std::size_t n = 1; n <= weights.size(); ++n) {
        const auto hyp = detail::count_ngrams(hypothesis, n);
        const auto ref = detail::count_ngrams(reference, n);
        double num = 0, den = 0;
        for (const auto& [g, c] : ref) {
            auto it = hyp.find(g);
            const std::size_t clipped = it == hyp.end() ? 0 : std::min(c, it->second);
            const double w = n == 1 ? token_weight(g) : 1.0;
            num += static_cast<double>(clipped) * w;
            den += static_cast<double>(c) * w;
        }
        const bool floor = n > 1 || opts.floor_weighted_denominator;
        p.push_back({num, floor ? std::max(1.0, den) : (den > 0 ? den : 1.0)});
    }
    double ref_len = 2;
    if (brevity == WeightedBrevity::standard) ref_len = static_cast<double>(reference.size());
    if (brevity == WeightedBrevity::reference_capped) ref_len = static_cast<double>(std::min<std::size_t>(2, reference.size()));
    const double bp = detail::brevity_penalty(ref_len, static_cast<double>(hypothesis.size()));
    return detail::combine(p, weights, bp, opts.epsilon);
}

} // namespace patchbench
