#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fond {

enum class SamplingMode {
    pooled,      // one shuffle over the whole source pool
    stratified,  // per-domain shuffles interleaved round-robin across domains
};

std::string to_string(SamplingMode m);
SamplingMode parse_sampling_mode(const std::string& text);

// Produces epochs as fixed partitions of a shuffled index order. Epoch e is a
// pure function of (seed, e); the final batch of an epoch may be short.
class BatchSampler {
public:
    BatchSampler(std::vector<int> domains, std::size_t batch_size, std::uint64_t seed,
                 SamplingMode mode = SamplingMode::pooled);

    std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;

    std::size_t pool_size() const noexcept { return domains_.size(); }
    std::size_t batch_size() const noexcept { return batch_size_; }
    std::size_t batches_per_epoch() const noexcept {
        return (domains_.size() + batch_size_ - 1) / batch_size_;
    }

private:
    std::vector<std::size_t> order(std::size_t epoch_index) const;

    std::vector<int> domains_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    SamplingMode mode_;
};

// Endless stream over consecutive epochs.
class BatchStream {
public:
    explicit BatchStream(BatchSampler sampler) : sampler_(std::move(sampler)) {}
    const std::vector<std::size_t>& next();
    std::size_t epoch_index() const noexcept { return epoch_; }

private:
    BatchSampler sampler_;
    std::vector<std::vector<std::size_t>> current_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    bool started_ = false;
};

}  // namespace fond
