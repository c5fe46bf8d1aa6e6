#include "fond/sampler.hpp"

#include "fond/errors.hpp"
#include "fond/random.hpp"

#include <algorithm>
#include <map>

namespace fond {

std::string to_string(SamplingMode m) { return m == SamplingMode::pooled ? "pooled" : "stratified"; }

SamplingMode parse_sampling_mode(const std::string& text) {
    if (text == "pooled") return SamplingMode::pooled;
    if (text == "stratified") return SamplingMode::stratified;
    throw ConfigError("unknown sampling mode '" + text + "'");
}

BatchSampler::BatchSampler(std::vector<int> domains, std::size_t batch_size, std::uint64_t seed,
                           SamplingMode mode)
    : domains_(std::move(domains)), batch_size_(batch_size), seed_(seed), mode_(mode) {
    if (domains_.empty()) throw ContractError("batch sampler: empty source pool");
    if (batch_size_ < 2) throw ConfigError("batch size must be >= 2");
}

std::vector<std::size_t> BatchSampler::order(std::size_t epoch_index) const {
    Rng rng(derive_seed(seed_, epoch_index));
    if (mode_ == SamplingMode::pooled) {
        std::vector<std::size_t> idx(domains_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        return idx;
    }
    std::map<int, std::vector<std::size_t>> by_domain;
    for (std::size_t i = 0; i < domains_.size(); ++i) by_domain[domains_[i]].push_back(i);
    std::vector<std::vector<std::size_t>> queues;
    for (auto& [d, idx] : by_domain) {
        rng.shuffle(idx);
        queues.push_back(std::move(idx));
    }
    std::vector<std::size_t> out;
    out.reserve(domains_.size());
    for (std::size_t round = 0; out.size() < domains_.size(); ++round) {
        for (const auto& q : queues) {
            if (round < q.size()) out.push_back(q[round]);
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> BatchSampler::epoch(std::size_t epoch_index) const {
    const std::vector<std::size_t> idx = order(epoch_index);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < idx.size(); start += batch_size_) {
        const std::size_t end = std::min(idx.size(), start + batch_size_);
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                             idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

const std::vector<std::size_t>& BatchStream::next() {
    if (!started_) {
        current_ = sampler_.epoch(0);
        started_ = true;
    } else if (++cursor_ == current_.size()) {
        current_ = sampler_.epoch(++epoch_);
        cursor_ = 0;
    }
    return current_[cursor_];
}

}  // namespace fond
