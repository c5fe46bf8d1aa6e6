#pragma once

#include "fond/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fond {

struct Sample {
    std::uint64_t id = 0;
    int domain = 0;
    int label = 0;
    std::vector<double> features;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t num_domains = 0;
    std::vector<Sample> samples;

    void validate() const;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class DomainTransform { rotation, affine, channel_bias };

std::string to_string(DomainTransform t);
DomainTransform parse_domain_transform(const std::string& text);

// Each class c gets a prototype mu_c; each domain s gets a linear map A_s and an
// offset o_s. A sample is x = A_s mu_c + o_s + eps with eps ~ N(0, noise_std^2 I).
//
//  rotation:     A_s rotates coordinate planes (0,1), (2,3), ... by angles
//                shift * U(-pi, pi); o_s = 0.
//  affine:       A_s = I + shift * linear_scale * M_s, M_s entries ~ N(0, 1/d);
//                o_s = shift * offset_scale * N(0, I).
//  channel_bias: A_s = diag(1 + shift * U(-0.5, 0.5)); o_s = shift * offset_scale * N(0, I).
//
// With style_dims > 0 the offsets are confined to the last style_dims input
// coordinates and the prototypes to the remaining ones, so that domain and
// class information live in separable subspaces.
struct SyntheticSpec {
    std::size_t num_domains = 4;
    std::size_t num_classes = 6;
    std::size_t input_dim = 16;
    DomainTransform transform = DomainTransform::affine;
    double shift = 1.0;
    double linear_scale = 1.0;
    double offset_scale = 1.0;
    double prototype_scale = 1.0;
    double noise_std = 1.0;
    double label_noise = 0.0;
    std::size_t samples_per_cell = 100;
    std::size_t style_dims = 0;

    void validate() const;
    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticDataset {
    Dataset data;
    Tensor2 prototypes;               // num_classes x input_dim
    std::vector<Tensor2> transforms;  // per domain, input_dim x input_dim, applied as A * mu
    std::vector<std::vector<double>> offsets;
};

// Deterministic given seed. Samples are ordered domain-major then class then draw.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// CSV with header `id,domain,label,f0,...,f{d-1}`. Lines starting with '#' are
// comments (used for provenance) and are ignored on ingest.
void export_csv(const Dataset& data, const std::filesystem::path& path,
                const std::vector<std::string>& comment_lines = {});
Dataset ingest_csv(const std::filesystem::path& path);

// Row-stacks the features of selected samples.
Tensor2 stack_features(std::span<const Sample> samples, std::span<const std::size_t> indices);
Tensor2 stack_features(std::span<const Sample> samples);

}  // namespace fond
