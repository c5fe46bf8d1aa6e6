#include "fond/networks.hpp"

#include "fond/errors.hpp"
#include "fond/ops.hpp"
#include "fond/random.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fond {

namespace {

void check_hidden(const std::vector<std::size_t>& widths, const char* name) {
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError(std::string(name) + " hidden widths must be >= 1");
    }
}

Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
    Mlp mlp;
    std::size_t fan_in = in;
    auto add_layer = [&](std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer{Tensor2(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
        for (double& w : layer.weights.values()) w = rng.uniform(-bound, bound);
        mlp.layers.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (std::size_t w : hidden) add_layer(w);
    add_layer(out);
    return mlp;
}

void append_buffers(Mlp& mlp, std::vector<std::span<double>>& out) {
    for (auto& layer : mlp.layers) {
        out.emplace_back(layer.weights.values());
        out.emplace_back(layer.bias);
    }
}

void append_buffers(const Mlp& mlp, std::vector<std::span<const double>>& out) {
    for (const auto& layer : mlp.layers) {
        out.emplace_back(layer.weights.values());
        out.emplace_back(layer.bias);
    }
}

Mlp zeros_like(const Mlp& mlp) {
    Mlp z;
    for (const auto& layer : mlp.layers) {
        z.layers.push_back({Tensor2(layer.weights.rows(), layer.weights.cols()),
                            std::vector<double>(layer.bias.size(), 0.0)});
    }
    return z;
}

}  // namespace

void NetworkConfig::validate() const {
    if (input_dim < 1 || feature_dim < 1 || projection_dim < 1 || num_classes < 1) {
        throw ConfigError("network dimensions must all be >= 1");
    }
    if (projection_dim > feature_dim) {
        throw ConfigError("projection_dim (" + std::to_string(projection_dim) +
                          ") must not exceed feature_dim (" + std::to_string(feature_dim) + ")");
    }
    if (feature_identity && feature_dim != input_dim) {
        throw ConfigError("identity feature network requires feature_dim == input_dim");
    }
    if (projection_identity && projection_dim != feature_dim) {
        throw ConfigError("identity projection network requires projection_dim == feature_dim");
    }
    check_hidden(feature_hidden, "feature");
    check_hidden(projection_hidden, "projection");
}

Tensor2 Mlp::forward(const Tensor2& x) const {
    Tensor2 a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        a = affine_forward(a, layers[l].weights, layers[l].bias);
        if (l + 1 < layers.size()) a = relu_forward(a);
    }
    return a;
}

Tensor2 Mlp::forward(const Tensor2& x, Trace& trace) const {
    trace.inputs.clear();
    trace.pre_activations.clear();
    Tensor2 a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        trace.inputs.push_back(a);
        a = affine_forward(a, layers[l].weights, layers[l].bias);
        if (l + 1 < layers.size()) {
            trace.pre_activations.push_back(a);
            a = relu_forward(a);
        }
    }
    return a;
}

Tensor2 Mlp::backward(const Tensor2& upstream, const Trace& trace, Mlp& grads) const {
    Tensor2 g = upstream;
    for (std::size_t l = layers.size(); l-- > 0;) {
        if (l + 1 < layers.size()) g = relu_backward(g, trace.pre_activations[l]);
        AffineGrads ag = affine_backward(g, trace.inputs[l], layers[l].weights);
        auto dw = grads.layers[l].weights.values();
        const auto src = ag.weights.values();
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += src[i];
        for (std::size_t j = 0; j < ag.bias.size(); ++j) grads.layers[l].bias[j] += ag.bias[j];
        g = std::move(ag.input);
    }
    return g;
}

std::size_t Mlp::input_dim() const { return layers.empty() ? 0 : layers.front().weights.rows(); }
std::size_t Mlp::output_dim() const { return layers.empty() ? 0 : layers.back().weights.cols(); }

std::vector<std::span<double>> ModelParams::buffers() {
    std::vector<std::span<double>> out;
    append_buffers(feature, out);
    append_buffers(projection, out);
    append_buffers(classifier, out);
    return out;
}

std::vector<std::span<const double>> ModelParams::buffers() const {
    std::vector<std::span<const double>> out;
    append_buffers(feature, out);
    append_buffers(projection, out);
    append_buffers(classifier, out);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (auto b : buffers()) n += b.size();
    return n;
}

ModelParams ModelParams::zeros_like() const {
    return {config, seed, fond::zeros_like(feature), fond::zeros_like(projection),
            fond::zeros_like(classifier)};
}

ModelParams init_params(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p{config, seed, {}, {}, {}};
    Rng rng(seed);
    if (!config.feature_identity) {
        p.feature = make_mlp(config.input_dim, config.feature_hidden, config.feature_dim, rng);
    }
    if (!config.projection_identity) {
        p.projection =
            make_mlp(config.feature_dim, config.projection_hidden, config.projection_dim, rng);
    }
    p.classifier = make_mlp(config.feature_dim, {}, config.num_classes, rng);
    return p;
}

Tensor2 forward_features(const ModelParams& params, const Tensor2& x) {
    if (x.cols() != params.config.input_dim) {
        throw DimensionError("forward_features: input " + x.shape_string() + " expects " +
                             std::to_string(params.config.input_dim) + " columns");
    }
    return params.feature.forward(x);
}

Tensor2 forward_projection(const ModelParams& params, const Tensor2& h) {
    if (h.cols() != params.config.feature_dim) {
        throw DimensionError("forward_projection: features " + h.shape_string() + " expects " +
                             std::to_string(params.config.feature_dim) + " columns");
    }
    return l2_normalize_rows(params.projection.forward(h)).output;
}

ClassifierOutput forward_classifier(const ModelParams& params, const Tensor2& h) {
    if (h.cols() != params.config.feature_dim) {
        throw DimensionError("forward_classifier: features " + h.shape_string() + " expects " +
                             std::to_string(params.config.feature_dim) + " columns");
    }
    ClassifierOutput out;
    out.logits = params.classifier.forward(h);
    out.probabilities = softmax_forward(out.logits);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

std::string network_config_to_json(const NetworkConfig& c) {
    nlohmann::ordered_json j;
    j["input_dim"] = c.input_dim;
    j["feature_dim"] = c.feature_dim;
    j["projection_dim"] = c.projection_dim;
    j["num_classes"] = c.num_classes;
    j["feature_hidden"] = c.feature_hidden;
    j["projection_hidden"] = c.projection_hidden;
    j["feature_identity"] = c.feature_identity;
    j["projection_identity"] = c.projection_identity;
    return j.dump();
}

NetworkConfig network_config_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        NetworkConfig c;
        c.input_dim = j.at("input_dim").get<std::size_t>();
        c.feature_dim = j.at("feature_dim").get<std::size_t>();
        c.projection_dim = j.at("projection_dim").get<std::size_t>();
        c.num_classes = j.at("num_classes").get<std::size_t>();
        c.feature_hidden = j.at("feature_hidden").get<std::vector<std::size_t>>();
        c.projection_hidden = j.at("projection_hidden").get<std::vector<std::size_t>>();
        c.feature_identity = j.at("feature_identity").get<bool>();
        c.projection_identity = j.at("projection_identity").get<bool>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network config: ") + e.what());
    }
}

namespace {

constexpr const char* kCheckpointMagic = "fond-checkpoint 1";

void write_hex(std::ostream& os, std::span<const double> values) {
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), values[i], std::chars_format::hex);
        if (i) os << ' ';
        os.write(buf, end - buf);
    }
    os << '\n';
}

void write_mlp(std::ostream& os, const Mlp& mlp, const char* name) {
    os << "network " << name << ' ' << mlp.layers.size() << '\n';
    for (const auto& layer : mlp.layers) {
        os << "weights " << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
        for (std::size_t r = 0; r < layer.weights.rows(); ++r) write_hex(os, layer.weights.row(r));
        os << "bias " << layer.bias.size() << '\n';
        write_hex(os, layer.bias);
    }
}

class CheckpointReader {
public:
    explicit CheckpointReader(std::istream& is) : is_(is) {}

    std::string line() {
        std::string s;
        if (!std::getline(is_, s)) throw ParseError("unexpected end of checkpoint", line_no_ + 1);
        ++line_no_;
        return s;
    }

    std::string expect_prefix(const std::string& prefix) {
        std::string s = line();
        if (s.rfind(prefix, 0) != 0) throw ParseError("expected '" + prefix + "'", line_no_);
        return s.substr(prefix.size());
    }

    void read_values(std::span<double> out) {
        const std::string s = line();
        const char* p = s.data();
        const char* end = s.data() + s.size();
        for (double& v : out) {
            while (p < end && *p == ' ') ++p;
            auto [next, ec] = std::from_chars(p, end, v, std::chars_format::hex);
            if (ec != std::errc()) throw ParseError("bad tensor value", line_no_);
            p = next;
        }
        while (p < end && *p == ' ') ++p;
        if (p != end) throw ParseError("trailing tensor values", line_no_);
    }

    Mlp read_mlp(const std::string& name) {
        std::istringstream hdr(expect_prefix("network " + name + " "));
        std::size_t count = 0;
        if (!(hdr >> count)) throw ParseError("bad layer count", line_no_);
        Mlp mlp;
        for (std::size_t l = 0; l < count; ++l) {
            std::istringstream ws(expect_prefix("weights "));
            std::size_t r = 0, c = 0;
            if (!(ws >> r >> c)) throw ParseError("bad weights shape", line_no_);
            DenseLayer layer{Tensor2(r, c), {}};
            for (std::size_t i = 0; i < r; ++i) read_values(layer.weights.row(i));
            std::istringstream bs(expect_prefix("bias "));
            std::size_t b = 0;
            if (!(bs >> b)) throw ParseError("bad bias length", line_no_);
            layer.bias.assign(b, 0.0);
            read_values(layer.bias);
            mlp.layers.push_back(std::move(layer));
        }
        return mlp;
    }

private:
    std::istream& is_;
    std::size_t line_no_ = 0;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::string& provenance) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os << kCheckpointMagic << '\n';
    os << "config " << network_config_to_json(params.config) << '\n';
    os << "seed " << params.seed << '\n';
    os << "provenance " << provenance << '\n';
    write_mlp(os, params.feature, "feature");
    write_mlp(os, params.projection, "projection");
    write_mlp(os, params.classifier, "classifier");
    os << "end\n";
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::string* provenance) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    CheckpointReader reader(is);
    if (reader.line() != kCheckpointMagic) throw ParseError("not a fond checkpoint", 1);
    ModelParams p;
    p.config = network_config_from_json(reader.expect_prefix("config "));
    p.seed = std::stoull(reader.expect_prefix("seed "));
    std::string prov = reader.expect_prefix("provenance ");
    if (provenance) *provenance = std::move(prov);
    p.feature = reader.read_mlp("feature");
    p.projection = reader.read_mlp("projection");
    p.classifier = reader.read_mlp("classifier");
    if (reader.line() != "end") throw ParseError("missing end marker", 0);
    p.config.validate();
    if ((!p.feature.layers.empty() && p.feature.input_dim() != p.config.input_dim) ||
        p.classifier.output_dim() != p.config.num_classes) {
        throw ParseError("checkpoint tensors disagree with config header", 0);
    }
    return p;
}

}  // namespace fond
