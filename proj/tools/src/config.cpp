#include "fond_app/config.hpp"

#include "fond/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fond::app {

namespace {

// --- strict reader ---------------------------------------------------------

class Reader {
public:
    Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError("config key '" + path_ + "' must be an object");
    }

    // Rejects every key that no get()/child() call asked for.
    void done() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
        }
    }

    bool has(const char* key) const { return obj_.contains(key); }

    const Json* find(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    template <typename T>
    void get(const char* key, T& dst) {
        if (const Json* v = find(key)) convert(*v, qualified(key), dst);
    }

    Reader child(const char* key) {
        const Json* v = find(key);
        if (!v) return Reader(empty(), qualified(key));
        return Reader(*v, qualified(key));
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    static const Json& empty() {
        static const Json e = Json::object();
        return e;
    }

    [[noreturn]] static void type_error(const std::string& where, const char* expected) {
        throw ConfigError("config key '" + where + "' must be " + expected);
    }

    static void convert(const Json& v, const std::string& where, double& out) {
        if (!v.is_number()) type_error(where, "a number");
        out = v.get<double>();
    }
    static void convert(const Json& v, const std::string& where, bool& out) {
        if (!v.is_boolean()) type_error(where, "a boolean");
        out = v.get<bool>();
    }
    static void convert(const Json& v, const std::string& where, int& out) {
        if (!v.is_number_integer()) type_error(where, "an integer");
        const auto x = v.get<std::int64_t>();
        if (x < INT32_MIN || x > INT32_MAX) type_error(where, "a 32-bit integer");
        out = static_cast<int>(x);
    }
    static void convert(const Json& v, const std::string& where, std::uint64_t& out) {
        if (!v.is_number_unsigned()) type_error(where, "a non-negative integer");
        out = v.get<std::uint64_t>();
    }
    static void convert(const Json& v, const std::string& where, std::string& out) {
        if (!v.is_string()) type_error(where, "a string");
        out = v.get<std::string>();
    }
    template <typename T>
    static void convert(const Json& v, const std::string& where, std::vector<T>& out) {
        if (!v.is_array()) type_error(where, "an array");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
            T item{};
            convert(v[i], where + "[" + std::to_string(i) + "]", item);
            out.push_back(std::move(item));
        }
    }

    const Json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

// --- section (de)serialization ----------------------------------------------

Json range_json(const Range& r) { return Json{{"lo", r.lo}, {"hi", r.hi}, {"log_scale", r.log_scale}}; }

void read_range(Reader& parent, const char* key, Range& r) {
    if (!parent.has(key)) {
        parent.find(key);
        return;
    }
    Reader rr = parent.child(key);
    rr.get("lo", r.lo);
    rr.get("hi", r.hi);
    rr.get("log_scale", r.log_scale);
    rr.done();
}

void read_string_enum(Reader& r, const char* key, std::string& tmp) { r.get(key, tmp); }

void read_size(Reader& r, const char* key, std::size_t& dst) {
    std::uint64_t v = dst;
    r.get(key, v);
    dst = static_cast<std::size_t>(v);
}

void read_sizes(Reader& r, const char* key, std::vector<std::size_t>& dst) {
    std::vector<std::uint64_t> v(dst.begin(), dst.end());
    r.get(key, v);
    dst.assign(v.begin(), v.end());
}

void deep_merge(Json& base, const Json& patch) {
    for (const auto& [key, value] : patch.items()) {
        auto it = base.find(key);
        if (it != base.end() && it->is_object() && value.is_object()) {
            deep_merge(*it, value);
        } else {
            base[key] = value;
        }
    }
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

Json to_json(const RunConfig& cfg, bool include_runtime) {
    Json doc;
    doc["seed"] = cfg.seed;
    if (include_runtime) {
        doc["out"] = cfg.out;
        doc["jobs"] = cfg.jobs;
    }
    const SyntheticSpec& s = cfg.dataset.synthetic;
    doc["dataset"] = {
        {"name", cfg.dataset.name},
        {"source", cfg.dataset.source},
        {"csv_path", cfg.dataset.csv_path},
        {"seed", cfg.dataset.seed},
        {"synthetic",
         {{"num_domains", s.num_domains},
          {"num_classes", s.num_classes},
          {"input_dim", s.input_dim},
          {"transform", to_string(s.transform)},
          {"shift", s.shift},
          {"linear_scale", s.linear_scale},
          {"offset_scale", s.offset_scale},
          {"prototype_scale", s.prototype_scale},
          {"noise_std", s.noise_std},
          {"label_noise", s.label_noise},
          {"samples_per_cell", s.samples_per_cell},
          {"style_dims", s.style_dims}}},
    };
    doc["split"] = {{"setting", cfg.split.setting},
                    {"shared_count", cfg.split.shared_count},
                    {"target_domain", cfg.split.target_domain},
                    {"plan_path", cfg.split.plan_path}};
    const NetworkConfig& n = cfg.network;
    doc["network"] = {{"input_dim", n.input_dim},
                      {"num_classes", n.num_classes},
                      {"feature_dim", n.feature_dim},
                      {"projection_dim", n.projection_dim},
                      {"feature_hidden", n.feature_hidden},
                      {"projection_hidden", n.projection_hidden},
                      {"feature_identity", n.feature_identity},
                      {"projection_identity", n.projection_identity}};
    const LossConfig& l = cfg.loss;
    doc["loss"] = {{"variant", to_string(l.variant)},
                   {"temperature", l.temperature},
                   {"a", l.a},
                   {"b", l.b},
                   {"lambda_xdom", l.lambda_xdom},
                   {"lambda_fair", l.lambda_fair},
                   {"alpha_mode", to_string(l.alpha_mode)}};
    const TrainerConfig& t = cfg.trainer;
    doc["trainer"] = {{"batch_size", t.batch_size},
                      {"max_steps", t.max_steps},
                      {"eval_every", t.eval_every},
                      {"dropout", t.dropout},
                      {"sampling", to_string(t.sampling)},
                      {"selection", to_string(t.selection)},
                      {"optimizer",
                       {{"kind", to_string(t.optimizer.kind)},
                        {"learning_rate", t.optimizer.learning_rate},
                        {"momentum", t.optimizer.momentum},
                        {"beta1", t.optimizer.beta1},
                        {"beta2", t.optimizer.beta2},
                        {"epsilon", t.optimizer.epsilon}}}};
    const HyperSpace& h = cfg.search.space;
    doc["search"] = {{"trials", cfg.search.trials},
                     {"space",
                      {{"learning_rate", range_json(h.learning_rate)},
                       {"lambda_xdom", range_json(h.lambda_xdom)},
                       {"lambda_fair", range_json(h.lambda_fair)},
                       {"temperature", range_json(h.temperature)},
                       {"a", range_json(h.a)},
                       {"b", range_json(h.b)},
                       {"dropout", range_json(h.dropout)}}}};
    doc["protocol"] = {{"repetitions", cfg.protocol.repetitions},
                       {"repetition", cfg.protocol.repetition},
                       {"validation_fraction", cfg.protocol.validation_fraction},
                       {"algorithms", cfg.protocol.algorithms},
                       {"settings", cfg.protocol.settings}};
    doc["checkpoint"] = cfg.checkpoint;
    return doc;
}

RunConfig from_json(const Json& doc) {
    RunConfig cfg;
    Reader root(doc, "");
    root.get("seed", cfg.seed);
    root.get("out", cfg.out);
    read_size(root, "jobs", cfg.jobs);
    root.get("checkpoint", cfg.checkpoint);
    {
        Reader r = root.child("dataset");
        r.get("name", cfg.dataset.name);
        r.get("source", cfg.dataset.source);
        r.get("csv_path", cfg.dataset.csv_path);
        r.get("seed", cfg.dataset.seed);
        Reader s = r.child("synthetic");
        SyntheticSpec& sp = cfg.dataset.synthetic;
        read_size(s, "num_domains", sp.num_domains);
        read_size(s, "num_classes", sp.num_classes);
        read_size(s, "input_dim", sp.input_dim);
        std::string transform = to_string(sp.transform);
        read_string_enum(s, "transform", transform);
        sp.transform = parse_domain_transform(transform);
        s.get("shift", sp.shift);
        s.get("linear_scale", sp.linear_scale);
        s.get("offset_scale", sp.offset_scale);
        s.get("prototype_scale", sp.prototype_scale);
        s.get("noise_std", sp.noise_std);
        s.get("label_noise", sp.label_noise);
        read_size(s, "samples_per_cell", sp.samples_per_cell);
        read_size(s, "style_dims", sp.style_dims);
        s.done();
        r.done();
    }
    {
        Reader r = root.child("split");
        r.get("setting", cfg.split.setting);
        read_size(r, "shared_count", cfg.split.shared_count);
        r.get("target_domain", cfg.split.target_domain);
        r.get("plan_path", cfg.split.plan_path);
        r.done();
    }
    {
        Reader r = root.child("network");
        NetworkConfig& n = cfg.network;
        read_size(r, "input_dim", n.input_dim);
        read_size(r, "num_classes", n.num_classes);
        read_size(r, "feature_dim", n.feature_dim);
        read_size(r, "projection_dim", n.projection_dim);
        read_sizes(r, "feature_hidden", n.feature_hidden);
        read_sizes(r, "projection_hidden", n.projection_hidden);
        r.get("feature_identity", n.feature_identity);
        r.get("projection_identity", n.projection_identity);
        r.done();
    }
    {
        Reader r = root.child("loss");
        LossConfig& l = cfg.loss;
        std::string variant = to_string(l.variant);
        std::string mode = to_string(l.alpha_mode);
        r.get("variant", variant);
        r.get("alpha_mode", mode);
        l.variant = parse_variant(variant);
        l.alpha_mode = parse_alpha_mode(mode);
        r.get("temperature", l.temperature);
        r.get("a", l.a);
        r.get("b", l.b);
        r.get("lambda_xdom", l.lambda_xdom);
        r.get("lambda_fair", l.lambda_fair);
        r.done();
    }
    {
        Reader r = root.child("trainer");
        TrainerConfig& t = cfg.trainer;
        read_size(r, "batch_size", t.batch_size);
        read_size(r, "max_steps", t.max_steps);
        read_size(r, "eval_every", t.eval_every);
        r.get("dropout", t.dropout);
        std::string sampling = to_string(t.sampling);
        std::string selection = to_string(t.selection);
        r.get("sampling", sampling);
        r.get("selection", selection);
        t.sampling = parse_sampling_mode(sampling);
        t.selection = parse_selection_metric(selection);
        Reader o = r.child("optimizer");
        std::string kind = to_string(t.optimizer.kind);
        o.get("kind", kind);
        t.optimizer.kind = parse_optimizer(kind);
        o.get("learning_rate", t.optimizer.learning_rate);
        o.get("momentum", t.optimizer.momentum);
        o.get("beta1", t.optimizer.beta1);
        o.get("beta2", t.optimizer.beta2);
        o.get("epsilon", t.optimizer.epsilon);
        o.done();
        r.done();
    }
    {
        Reader r = root.child("search");
        read_size(r, "trials", cfg.search.trials);
        Reader s = r.child("space");
        HyperSpace& h = cfg.search.space;
        read_range(s, "learning_rate", h.learning_rate);
        read_range(s, "lambda_xdom", h.lambda_xdom);
        read_range(s, "lambda_fair", h.lambda_fair);
        read_range(s, "temperature", h.temperature);
        read_range(s, "a", h.a);
        read_range(s, "b", h.b);
        read_range(s, "dropout", h.dropout);
        s.done();
        r.done();
    }
    {
        Reader r = root.child("protocol");
        read_size(r, "repetitions", cfg.protocol.repetitions);
        read_size(r, "repetition", cfg.protocol.repetition);
        r.get("validation_fraction", cfg.protocol.validation_fraction);
        r.get("algorithms", cfg.protocol.algorithms);
        r.get("settings", cfg.protocol.settings);
        r.done();
    }
    root.done();
    return cfg;
}

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must have the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

RunConfig load_run_config(const LoadOptions& options) {
    Json doc = to_json(default_run_config());
    if (options.config_path) {
        std::ifstream in(*options.config_path, std::ios::binary);
        if (!in) throw IoError("cannot open config file " + options.config_path->string());
        std::stringstream ss;
        ss << in.rdbuf();
        Json file;
        try {
            file = Json::parse(ss.str());
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config file " + options.config_path->string() + " is not valid JSON (byte " +
                              std::to_string(e.byte) + ")");
        }
        if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
        deep_merge(doc, file);
    }
    for (const auto& o : options.overrides) apply_override(doc, o);
    if (options.seed) doc["seed"] = *options.seed;
    if (options.out) doc["out"] = *options.out;
    if (options.jobs) doc["jobs"] = *options.jobs;
    RunConfig cfg = from_json(doc);
    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg) {
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
    const DatasetSection& d = cfg.dataset;
    if (d.name.empty()) throw ConfigError("dataset.name must not be empty");
    if (d.source == "synthetic") {
        d.synthetic.validate();
    } else if (d.source == "csv") {
        if (d.csv_path.empty()) throw ConfigError("dataset.csv_path is required for source 'csv'");
    } else {
        throw ConfigError("dataset.source must be 'synthetic' or 'csv', got '" + d.source + "'");
    }
    (void)split_request(cfg.split);
    if (cfg.split.target_domain < 0) throw ConfigError("split.target_domain must be >= 0");
    cfg.loss.validate();
    cfg.trainer.validate();
    cfg.search.space.validate();
    if (cfg.protocol.repetitions < 1) throw ConfigError("protocol.repetitions must be >= 1");
    const double vf = cfg.protocol.validation_fraction;
    if (!(vf > 0.0 && vf < 1.0)) throw ConfigError("protocol.validation_fraction must lie in (0, 1)");
    if (cfg.protocol.algorithms.empty()) throw ConfigError("protocol.algorithms must not be empty");
    for (const auto& a : cfg.protocol.algorithms) (void)parse_variant(a);
    if (cfg.protocol.settings.empty()) throw ConfigError("protocol.settings must not be empty");
    for (const auto& s : cfg.protocol.settings) (void)parse_shared_setting(s);
}

SplitRequest split_request(const SplitSection& split) {
    SplitRequest r;
    if (split.setting == "explicit") {
        if (split.shared_count < 1) throw ConfigError("split.shared_count must be >= 1 with setting 'explicit'");
        r.setting.reset();
        r.shared_count = split.shared_count;
    } else {
        r.setting = parse_shared_setting(split.setting);
    }
    return r;
}

ExperimentSetup experiment_setup(const RunConfig& cfg) {
    ExperimentSetup s;
    s.network = cfg.network;
    s.loss = cfg.loss;
    s.trainer = cfg.trainer;
    s.validation_fraction = cfg.protocol.validation_fraction;
    return s;
}

ProtocolOptions protocol_options(const RunConfig& cfg) {
    ProtocolOptions o;
    o.trials = cfg.search.trials;
    o.space = cfg.search.space;
    o.jobs = cfg.jobs;
    return o;
}

}  // namespace fond::app
