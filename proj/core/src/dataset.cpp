#include "fond/dataset.hpp"

#include "fond/errors.hpp"
#include "fond/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>

namespace fond {

std::string to_string(DomainTransform t) {
    switch (t) {
        case DomainTransform::rotation: return "rotation";
        case DomainTransform::affine: return "affine";
        case DomainTransform::channel_bias: return "channel_bias";
    }
    return "?";
}

DomainTransform parse_domain_transform(const std::string& text) {
    if (text == "rotation") return DomainTransform::rotation;
    if (text == "affine") return DomainTransform::affine;
    if (text == "channel_bias") return DomainTransform::channel_bias;
    throw ConfigError("unknown domain transform '" + text + "'");
}

void Dataset::validate() const {
    for (const auto& s : samples) {
        if (s.features.size() != input_dim) {
            throw DimensionError("sample " + std::to_string(s.id) + " has " +
                                 std::to_string(s.features.size()) + " features, expected " +
                                 std::to_string(input_dim));
        }
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= num_classes ||
            s.domain < 0 || static_cast<std::size_t>(s.domain) >= num_domains) {
            throw ContractError("sample " + std::to_string(s.id) + " label/domain out of range");
        }
        for (double v : s.features) {
            if (!std::isfinite(v)) throw ContractError("sample " + std::to_string(s.id) + " has non-finite feature");
        }
    }
}

void SyntheticSpec::validate() const {
    if (num_domains < 2) throw ConfigError("synthetic spec needs at least 2 domains");
    if (num_classes < 3) throw ConfigError("synthetic spec needs at least 3 classes");
    if (input_dim < 1) throw ConfigError("synthetic spec needs input_dim >= 1");
    if (!(shift >= 0.0)) throw ConfigError("shift magnitude must be >= 0");
    if (!(linear_scale >= 0.0)) throw ConfigError("linear_scale must be >= 0");
    if (!(offset_scale >= 0.0)) throw ConfigError("offset_scale must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    if (!(label_noise >= 0.0 && label_noise < 1.0)) throw ConfigError("label_noise must lie in [0, 1)");
    if (samples_per_cell < 1) throw ConfigError("samples_per_cell must be >= 1");
    if (style_dims >= input_dim) throw ConfigError("style_dims must be < input_dim");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t d = spec.input_dim;
    const std::size_t content_dims = d - spec.style_dims;
    const bool split_style = spec.style_dims > 0;

    SyntheticDataset out;
    out.data.input_dim = d;
    out.data.num_classes = spec.num_classes;
    out.data.num_domains = spec.num_domains;

    Rng proto_rng(derive_seed(seed, 1));
    out.prototypes = Tensor2(spec.num_classes, d);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t k = 0; k < content_dims; ++k) {
            out.prototypes(c, k) = spec.prototype_scale * proto_rng.normal();
        }
    }

    Rng domain_rng(derive_seed(seed, 2));
    for (std::size_t s = 0; s < spec.num_domains; ++s) {
        Tensor2 a(d, d);
        for (std::size_t k = 0; k < d; ++k) a(k, k) = 1.0;
        std::vector<double> offset(d, 0.0);
        switch (spec.transform) {
            case DomainTransform::rotation:
                for (std::size_t k = 0; k + 1 < d; k += 2) {
                    const double theta = spec.shift * domain_rng.uniform(-std::numbers::pi, std::numbers::pi);
                    a(k, k) = std::cos(theta);
                    a(k, k + 1) = -std::sin(theta);
                    a(k + 1, k) = std::sin(theta);
                    a(k + 1, k + 1) = std::cos(theta);
                }
                break;
            case DomainTransform::affine: {
                const double scale = spec.shift * spec.linear_scale / std::sqrt(static_cast<double>(d));
                for (double& v : a.values()) v += scale * domain_rng.normal();
                for (double& v : offset) v = spec.shift * spec.offset_scale * domain_rng.normal();
                break;
            }
            case DomainTransform::channel_bias:
                for (std::size_t k = 0; k < d; ++k) a(k, k) = 1.0 + spec.shift * domain_rng.uniform(-0.5, 0.5);
                for (double& v : offset) v = spec.shift * spec.offset_scale * domain_rng.normal();
                break;
        }
        if (split_style) {
            for (std::size_t k = 0; k < content_dims; ++k) offset[k] = 0.0;
        }
        out.transforms.push_back(std::move(a));
        out.offsets.push_back(std::move(offset));
    }

    Rng sample_rng(derive_seed(seed, 3));
    std::uint64_t next_id = 0;
    out.data.samples.reserve(spec.num_domains * spec.num_classes * spec.samples_per_cell);
    for (std::size_t s = 0; s < spec.num_domains; ++s) {
        const Tensor2& a = out.transforms[s];
        std::vector<double> mean(d);
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            for (std::size_t r = 0; r < d; ++r) {
                double acc = out.offsets[s][r];
                for (std::size_t k = 0; k < d; ++k) acc += a(r, k) * out.prototypes(c, k);
                mean[r] = acc;
            }
            for (std::size_t n = 0; n < spec.samples_per_cell; ++n) {
                Sample smp;
                smp.id = next_id++;
                smp.domain = static_cast<int>(s);
                smp.label = static_cast<int>(c);
                smp.features.resize(d);
                for (std::size_t r = 0; r < d; ++r) smp.features[r] = mean[r] + spec.noise_std * sample_rng.normal();
                if (spec.label_noise > 0.0 && sample_rng.uniform() < spec.label_noise) {
                    const std::size_t other = sample_rng.index(spec.num_classes - 1);
                    smp.label = static_cast<int>(other >= c ? other + 1 : other);
                }
                out.data.samples.push_back(std::move(smp));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string csv_header(std::size_t d) {
    std::string h = "id,domain,label";
    for (std::size_t k = 0; k < d; ++k) h += ",f" + std::to_string(k);
    return h;
}

void append_double(std::string& out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, end);
}

template <typename T>
bool parse_field(std::string_view field, T& out) {
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
    return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

void export_csv(const Dataset& data, const std::filesystem::path& path,
                const std::vector<std::string>& comment_lines) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    for (const auto& c : comment_lines) os << "# " << c << '\n';
    os << csv_header(data.input_dim) << '\n';
    std::string line;
    for (const auto& s : data.samples) {
        line = std::to_string(s.id) + ',' + std::to_string(s.domain) + ',' + std::to_string(s.label);
        for (double v : s.features) {
            line += ',';
            append_double(line, v);
        }
        line += '\n';
        os << line;
    }
    if (!os) throw IoError("failed writing " + path.string());
}

Dataset ingest_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset: " + path.string());

    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    int max_label = -1, max_domain = -1;
    std::vector<std::string_view> fields;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        fields.clear();
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }

        if (!have_header) {
            if (fields.size() < 4 || fields[0] != "id" || fields[1] != "domain" || fields[2] != "label") {
                throw ParseError("header must be id,domain,label,f0..f{d-1}", line_no);
            }
            data.input_dim = fields.size() - 3;
            if (line != csv_header(data.input_dim)) {
                throw ParseError("feature columns must be named f0..f" + std::to_string(data.input_dim - 1), line_no);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != data.input_dim + 3) {
            throw ParseError("expected " + std::to_string(data.input_dim + 3) + " fields, found " +
                             std::to_string(fields.size()), line_no);
        }
        Sample s;
        if (!parse_field(fields[0], s.id) || !parse_field(fields[1], s.domain) ||
            !parse_field(fields[2], s.label) || s.domain < 0 || s.label < 0) {
            throw ParseError("malformed id/domain/label", line_no);
        }
        s.features.resize(data.input_dim);
        for (std::size_t k = 0; k < data.input_dim; ++k) {
            if (!parse_field(fields[k + 3], s.features[k])) {
                throw ParseError("malformed feature f" + std::to_string(k), line_no);
            }
            if (!std::isfinite(s.features[k])) {
                throw ParseError("non-finite feature f" + std::to_string(k), line_no);
            }
        }
        max_label = std::max(max_label, s.label);
        max_domain = std::max(max_domain, s.domain);
        data.samples.push_back(std::move(s));
    }
    if (!have_header) throw ParseError("missing header", line_no);
    if (data.samples.empty()) throw ParseError("dataset has a header but no samples", line_no);
    data.num_classes = static_cast<std::size_t>(max_label + 1);
    data.num_domains = static_cast<std::size_t>(max_domain + 1);

    std::map<std::pair<int, int>, std::size_t> cells;
    for (const auto& s : data.samples) ++cells[{s.domain, s.label}];
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& [key, n] : cells) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
    }
    if (hi > 10 * lo) {
        std::clog << "[warn] " << path.string() << ": (domain, class) cell sizes range from " << lo
                  << " to " << hi << " (>10x imbalance)\n";
    }
    return data;
}

Tensor2 stack_features(std::span<const Sample> samples, std::span<const std::size_t> indices) {
    const std::size_t d = indices.empty() ? 0 : samples[indices[0]].features.size();
    Tensor2 x(indices.size(), d);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& f = samples[indices[r]].features;
        if (f.size() != d) throw DimensionError("stack_features: ragged feature vectors");
        std::copy(f.begin(), f.end(), x.row(r).begin());
    }
    return x;
}

Tensor2 stack_features(std::span<const Sample> samples) {
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return stack_features(samples, idx);
}

}  // namespace fond
