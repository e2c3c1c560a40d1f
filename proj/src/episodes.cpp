// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numeric>

#include "dmsd/dataset.hpp"
#include "dmsd/errors.hpp"

namespace dmsd {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_episode_shape(std::size_t way, std::size_t shot, std::size_t queries) {
    if (way == 0 || shot == 0 || queries == 0) {
        throw SamplingError("episode shape needs way, shot and queries >= 1");
    }
}

/// Pool sizes by largest remainder so they sum exactly to n.
std::array<std::size_t, 3> pool_sizes(std::size_t n, const std::array<double, 3>& f) {
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double raw = f[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(raw));
        rem[k] = raw - static_cast<double>(sizes[k]);
        used += sizes[k];
    }
    while (used < n) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (rem[k] > rem[best]) best = k;
        }
        ++sizes[best];
        rem[best] = -1.0;
        ++used;
    }
    return sizes;
}

}  // namespace

TargetSplit split_target(const Dataset& target, std::array<double, 3> fractions, std::uint64_t seed) {
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0) || !std::isfinite(f)) throw SpecError("split fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw SpecError("split fractions must sum to 1");
    for (const auto& v : target.videos) {
        if (!v.label) throw SpecError("split_target needs labeled target data (video " + std::to_string(v.id) + ")");
    }

    // Class-grouped order, shuffled within each class.
    Rng rng(seed);
    std::vector<std::size_t> order;
    order.reserve(target.size());
    for (auto members : videos_by_class(target)) {
        rng.shuffle(members);
        order.insert(order.end(), members.begin(), members.end());
    }

    // Walk the grouped order handing each position to the pool furthest
    // behind its quota, so every class is split close to the fractions.
    const std::size_t n = order.size();
    const auto sizes = pool_sizes(n, fractions);
    for (auto s : sizes) {
        if (s == 0) throw SpecError("split leaves an empty pool for " + std::to_string(n) + " videos");
    }
    std::array<std::size_t, 3> assigned{};
    TargetSplit split;
    split.lt.num_categories = split.ut.num_categories = target.num_categories;
    split.lt.category_names = split.ut.category_names = target.category_names;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pick = 3;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < 3; ++k) {
            if (assigned[k] >= sizes[k]) continue;
            const double deficit = static_cast<double>(sizes[k]) * static_cast<double>(i + 1) / static_cast<double>(n) -
                                   static_cast<double>(assigned[k]);
            if (deficit > best) {
                best = deficit;
                pick = k;
            }
        }
        ++assigned[pick];
        const VideoFeature& v = target.videos[order[i]];
        switch (pick) {
            case 0: split.u_train.push_back(UnlabeledVideo{v.id, v.frames}); break;
            case 1: split.lt.videos.push_back(v); break;
            default: split.ut.videos.push_back(v); break;
        }
    }
    return split;
}

std::vector<std::size_t> distribute_queries(std::size_t total, std::size_t way, Rng& rng) {
    std::vector<std::size_t> counts(way, total / way);
    for (auto c : rng.choose(way, total % way)) ++counts[c];
    return counts;
}

EpisodeSampler::EpisodeSampler(const Dataset& source, const std::vector<UnlabeledVideo>& unlabeled, std::size_t way,
                               std::size_t shot, std::size_t queries, std::size_t num_unlabeled)
    : source_(&source),
      unlabeled_(&unlabeled),
      way_(way),
      shot_(shot),
      queries_(queries),
      num_unlabeled_(num_unlabeled),
      by_class_(videos_by_class(source)) {
    check_episode_shape(way, shot, queries);
    const std::size_t need = shot + ceil_div(queries, way);
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
        if (by_class_[c].size() >= need) eligible_.push_back(static_cast<std::uint32_t>(c));
    }
    if (eligible_.size() < way) {
        throw SamplingError("source has " + std::to_string(eligible_.size()) + " classes with >= " +
                            std::to_string(need) + " instances, episode needs " + std::to_string(way));
    }
    if (unlabeled.size() < num_unlabeled) {
        throw SamplingError("unlabeled pool has " + std::to_string(unlabeled.size()) + " videos, episode needs " +
                            std::to_string(num_unlabeled));
    }
}

Episode EpisodeSampler::sample(Rng& rng) const {
    Episode ep;
    ep.way = way_;
    ep.shot = shot_;
    const auto picked = rng.choose(eligible_.size(), way_);
    const auto per_class = distribute_queries(queries_, way_, rng);
    for (std::size_t c = 0; c < way_; ++c) {
        const std::uint32_t cls = eligible_[picked[c]];
        ep.classes.push_back(cls);
        const auto& members = by_class_[cls];
        const auto draw = rng.choose(members.size(), shot_ + per_class[c]);
        for (std::size_t k = 0; k < draw.size(); ++k) {
            const VideoFeature* v = &source_->videos[members[draw[k]]];
            if (k < shot_) {
                ep.support.push_back(v);
                ep.support_labels.push_back(c);
            } else {
                ep.query.push_back(v);
                ep.query_labels.push_back(c);
            }
        }
    }
    for (auto i : rng.choose(unlabeled_->size(), num_unlabeled_)) ep.unlabeled.push_back(&(*unlabeled_)[i]);
    return ep;
}

EvalEpisodeSampler::EvalEpisodeSampler(const Dataset& lt, const Dataset& ut, std::size_t way, std::size_t shot,
                                       std::size_t queries)
    : lt_(&lt),
      ut_(&ut),
      way_(way),
      shot_(shot),
      queries_(queries),
      lt_by_class_(videos_by_class(lt)),
      ut_by_class_(videos_by_class(ut)) {
    check_episode_shape(way, shot, queries);
    const std::size_t need_q = ceil_div(queries, way);
    const std::size_t classes = std::min(lt_by_class_.size(), ut_by_class_.size());
    for (std::size_t c = 0; c < classes; ++c) {
        if (lt_by_class_[c].size() >= shot && ut_by_class_[c].size() >= need_q) {
            eligible_.push_back(static_cast<std::uint32_t>(c));
        }
    }
    if (eligible_.size() < way) {
        throw SamplingError("evaluation pools have " + std::to_string(eligible_.size()) +
                            " usable classes, episode needs " + std::to_string(way));
    }
}

Episode EvalEpisodeSampler::sample(Rng& rng) const {
    Episode ep;
    ep.way = way_;
    ep.shot = shot_;
    const auto picked = rng.choose(eligible_.size(), way_);
    const auto per_class = distribute_queries(queries_, way_, rng);
    for (std::size_t c = 0; c < way_; ++c) {
        const std::uint32_t cls = eligible_[picked[c]];
        ep.classes.push_back(cls);
        const auto& lt_members = lt_by_class_[cls];
        for (auto i : rng.choose(lt_members.size(), shot_)) {
            ep.support.push_back(&lt_->videos[lt_members[i]]);
            ep.support_labels.push_back(c);
        }
        const auto& ut_members = ut_by_class_[cls];
        for (auto i : rng.choose(ut_members.size(), per_class[c])) {
            ep.query.push_back(&ut_->videos[ut_members[i]]);
            ep.query_labels.push_back(c);
        }
    }
    return ep;
}

Episode sample_episode(const Dataset& source, const std::vector<UnlabeledVideo>& u_train, std::size_t way,
                       std::size_t shot, std::size_t queries, std::size_t num_unlabeled, Rng& rng) {
    return EpisodeSampler(source, u_train, way, shot, queries, num_unlabeled).sample(rng);
}

Episode sample_eval_episode(const Dataset& lt, const Dataset& ut, std::size_t way, std::size_t shot,
                            std::size_t queries, Rng& rng) {
    return EvalEpisodeSampler(lt, ut, way, shot, queries).sample(rng);
}

}  // namespace dmsd
