#include "fond/split.hpp"

#include "fond/errors.hpp"
#include "fond/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fond {

std::string to_string(SharedSetting s) { return s == SharedSetting::low ? "Low" : "High"; }

SharedSetting parse_shared_setting(const std::string& text) {
    if (text == "Low" || text == "low") return SharedSetting::low;
    if (text == "High" || text == "high") return SharedSetting::high;
    throw ConfigError("unknown shared-class setting '" + text + "' (expected Low or High)");
}

PresetSizes preset_sizes(TablePreset preset) {
    switch (preset) {
        case TablePreset::pacs: return {7, 3, 5};
        case TablePreset::vlcs: return {5, 2, 4};
        case TablePreset::office_home: return {65, 25, 50};
    }
    return {0, 0, 0};
}

std::size_t shared_class_count(std::size_t n, SharedSetting setting) {
    for (auto p : {TablePreset::pacs, TablePreset::vlcs, TablePreset::office_home}) {
        const PresetSizes sizes = preset_sizes(p);
        if (sizes.num_classes == n) return setting == SharedSetting::low ? sizes.low_shared : sizes.high_shared;
    }
    if (n < 2) return 0;
    const double frac = setting == SharedSetting::low ? 1.0 / 3.0 : 2.0 / 3.0;
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * frac));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

bool SplitPlan::is_linked(int label) const {
    return std::binary_search(linked_classes.begin(), linked_classes.end(), label);
}

bool SplitPlan::is_shared(int label) const {
    return std::binary_search(shared_classes.begin(), shared_classes.end(), label);
}

std::vector<std::uint8_t> SplitPlan::linked_mask(std::size_t num_classes) const {
    std::vector<std::uint8_t> mask(num_classes, 0);
    for (int c : linked_classes) {
        if (c >= 0 && static_cast<std::size_t>(c) < num_classes) mask[static_cast<std::size_t>(c)] = 1;
    }
    return mask;
}

std::vector<int> SplitPlan::classes() const {
    std::vector<int> all = shared_classes;
    all.insert(all.end(), linked_classes.begin(), linked_classes.end());
    std::sort(all.begin(), all.end());
    return all;
}

SplitPlan make_split_plan(const std::vector<int>& classes_in, std::size_t num_domains_total,
                          int target_domain, const SplitRequest& request, std::uint64_t seed) {
    std::vector<int> classes = classes_in;
    std::sort(classes.begin(), classes.end());
    if (std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
        throw ConfigError("class set contains duplicates");
    }
    const std::size_t n = classes.size();
    if (n < 3) throw ConfigError("need at least 3 classes, got " + std::to_string(n));
    if (num_domains_total < 3) {
        throw ConfigError("need at least 2 source domains (3 domains total), got " +
                          std::to_string(num_domains_total));
    }
    if (target_domain < 0 || static_cast<std::size_t>(target_domain) >= num_domains_total) {
        throw ConfigError("target domain " + std::to_string(target_domain) + " out of range");
    }

    std::size_t n_shared = 0;
    std::string label;
    if (request.shared_count) {
        n_shared = *request.shared_count;
        label = "explicit:" + std::to_string(n_shared);
    } else if (request.setting) {
        n_shared = shared_class_count(n, *request.setting);
        label = to_string(*request.setting);
    } else {
        throw ConfigError("split request needs a setting or an explicit shared count");
    }
    if (n_shared < 1 || n_shared >= n) {
        throw ConfigError("shared class count " + std::to_string(n_shared) + " must lie in [1, " +
                          std::to_string(n - 1) + "]");
    }

    SplitPlan plan;
    plan.target_domain = target_domain;
    plan.setting = label;
    plan.seed = seed;
    for (std::size_t s = 0; s < num_domains_total; ++s) {
        if (static_cast<int>(s) != target_domain) plan.source_domains.push_back(static_cast<int>(s));
    }
    const std::size_t k = plan.source_domains.size();

    Rng rng(seed);
    std::vector<int> order = classes;
    rng.shuffle(order);
    std::vector<int> domain_order = plan.source_domains;
    rng.shuffle(domain_order);

    const std::vector<int> shared(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_shared));
    const std::vector<int> linked(order.begin() + static_cast<std::ptrdiff_t>(n_shared), order.end());

    // Linked class j lives in domain_order[j mod K]; shared class j is left out of
    // domain_order[j mod K]. The first shared class therefore skips the domain of
    // the first linked class, so no source domain ends up holding every class.
    for (std::size_t j = 0; j < linked.size(); ++j) {
        plan.assignment[linked[j]] = {domain_order[j % k]};
    }
    for (std::size_t j = 0; j < shared.size(); ++j) {
        const int skipped = domain_order[j % k];
        std::vector<int> doms;
        for (int s : plan.source_domains) {
            if (s != skipped) doms.push_back(s);
        }
        plan.assignment[shared[j]] = std::move(doms);
    }
    plan.shared_classes = shared;
    plan.linked_classes = linked;
    std::sort(plan.shared_classes.begin(), plan.shared_classes.end());
    std::sort(plan.linked_classes.begin(), plan.linked_classes.end());
    return plan;
}

void validate_split_plan(const SplitPlan& plan, std::size_t num_domains_total) {
    auto fail = [](const std::string& why) { throw ContractError("split plan: " + why); };
    const std::set<int> shared(plan.shared_classes.begin(), plan.shared_classes.end());
    const std::set<int> linked(plan.linked_classes.begin(), plan.linked_classes.end());
    if (shared.empty() || linked.empty()) fail("both class groups must be non-empty");
    for (int c : shared) {
        if (linked.count(c)) fail("class " + std::to_string(c) + " is both linked and shared");
    }
    std::set<int> sources(plan.source_domains.begin(), plan.source_domains.end());
    if (sources.count(plan.target_domain)) fail("target domain listed as a source");
    if (sources.size() + 1 != num_domains_total) fail("source domains must be all non-target domains");
    const std::size_t k = sources.size();

    std::set<int> assigned;
    std::map<int, std::set<int>> domain_classes;
    for (const auto& [c, doms] : plan.assignment) {
        assigned.insert(c);
        const std::set<int> unique(doms.begin(), doms.end());
        if (unique.size() != doms.size()) fail("duplicate domain for class " + std::to_string(c));
        for (int s : unique) {
            if (!sources.count(s)) fail("class " + std::to_string(c) + " assigned to non-source domain");
            domain_classes[s].insert(c);
        }
        if (linked.count(c) && unique.size() != 1) fail("linked class " + std::to_string(c) + " must map to one domain");
        if (shared.count(c) && unique.size() != k - 1) {
            fail("shared class " + std::to_string(c) + " must map to K-1 domains");
        }
    }
    std::set<int> all = shared;
    all.insert(linked.begin(), linked.end());
    if (assigned != all) fail("assignment keys must equal Y_L union Y_S");
    for (const auto& [s, cls] : domain_classes) {
        if (cls.size() == all.size()) fail("source domain " + std::to_string(s) + " holds every class");
    }
}

SplitPlan fold_plan(const SplitPlan& plan, int held_out) {
    if (std::find(plan.source_domains.begin(), plan.source_domains.end(), held_out) == plan.source_domains.end()) {
        throw ContractError("fold_plan: domain " + std::to_string(held_out) + " is not a source domain");
    }
    SplitPlan fold;
    fold.target_domain = held_out;
    fold.setting = plan.setting;
    fold.seed = plan.seed;
    for (int s : plan.source_domains) {
        if (s != held_out) fold.source_domains.push_back(s);
    }
    for (const auto& [c, doms] : plan.assignment) {
        std::vector<int> kept;
        for (int s : doms) {
            if (s != held_out) kept.push_back(s);
        }
        if (kept.empty()) continue;
        (kept.size() == 1 ? fold.linked_classes : fold.shared_classes).push_back(c);
        fold.assignment[c] = std::move(kept);
    }
    return fold;
}

// ---------------------------------------------------------------------------
// Plan file
// ---------------------------------------------------------------------------

namespace {

void write_list(std::ostream& os, const char* key, const std::vector<int>& values) {
    os << key;
    for (int v : values) os << ' ' << v;
    os << '\n';
}

std::vector<int> read_list(std::istringstream& is) {
    std::vector<int> out;
    int v;
    while (is >> v) out.push_back(v);
    return out;
}

}  // namespace

std::string format_split_plan(const SplitPlan& plan) {
    std::ostringstream os;
    os << "fond-split-plan 1\n";
    os << "setting " << plan.setting << '\n';
    os << "seed " << plan.seed << '\n';
    os << "target_domain " << plan.target_domain << '\n';
    write_list(os, "source_domains", plan.source_domains);
    write_list(os, "shared_classes", plan.shared_classes);
    write_list(os, "linked_classes", plan.linked_classes);
    for (const auto& [c, doms] : plan.assignment) {
        os << "class " << c << " domains";
        for (int s : doms) os << ' ' << s;
        os << '\n';
    }
    os << "end\n";
    return os.str();
}

SplitPlan parse_split_plan(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    SplitPlan plan;
    bool ended = false;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        return true;
    };
    while (next() && (line.empty() || line.front() == '#')) {
    }
    if (line != "fond-split-plan 1") throw ParseError("not a fond split plan", line_no);
    bool seen_target = false;
    while (next()) {
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "setting") {
            ls >> plan.setting;
        } else if (key == "seed") {
            if (!(ls >> plan.seed)) throw ParseError("bad seed", line_no);
        } else if (key == "target_domain") {
            if (!(ls >> plan.target_domain)) throw ParseError("bad target_domain", line_no);
            seen_target = true;
        } else if (key == "source_domains") {
            plan.source_domains = read_list(ls);
        } else if (key == "shared_classes") {
            plan.shared_classes = read_list(ls);
        } else if (key == "linked_classes") {
            plan.linked_classes = read_list(ls);
        } else if (key == "class") {
            int c;
            std::string word;
            if (!(ls >> c >> word) || word != "domains") throw ParseError("bad class line", line_no);
            plan.assignment[c] = read_list(ls);
        } else if (key == "end") {
            ended = true;
            break;
        } else {
            throw ParseError("unknown key '" + key + "'", line_no);
        }
    }
    if (!ended) throw ParseError("missing end marker", line_no);
    if (!seen_target) throw ParseError("missing target_domain", line_no);
    return plan;
}

void save_split_plan(const SplitPlan& plan, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << format_split_plan(plan);
    if (!os) throw IoError("failed writing " + path.string());
}

SplitPlan load_split_plan(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open split plan: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_split_plan(ss.str());
}

// ---------------------------------------------------------------------------

SplitData apply_split(const Dataset& data, const SplitPlan& plan, double validation_fraction,
                      std::uint64_t validation_seed) {
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in [0, 1)");
    }
    const std::vector<int> classes = plan.classes();
    std::set<int> domains(plan.source_domains.begin(), plan.source_domains.end());
    domains.insert(plan.target_domain);

    SplitData out;
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;  // (domain, class) -> pool indices
    for (const auto& s : data.samples) {
        if (!std::binary_search(classes.begin(), classes.end(), s.label)) {
            throw PlanMismatchError("class " + std::to_string(s.label) + " is present in the dataset but not in the plan");
        }
        if (!domains.count(s.domain)) {
            throw PlanMismatchError("domain " + std::to_string(s.domain) + " is present in the dataset but not in the plan");
        }
        if (s.domain == plan.target_domain) {
            out.target.push_back(s);
            continue;
        }
        const auto& allowed = plan.assignment.at(s.label);
        if (std::find(allowed.begin(), allowed.end(), s.domain) != allowed.end()) {
            cells[{s.domain, s.label}].push_back(out.source_pool.size());
            out.source_pool.push_back(s);
        }
    }

    std::vector<std::uint8_t> is_validation(out.source_pool.size(), 0);
    Rng rng(validation_seed);
    for (auto& [key, idx] : cells) {
        rng.shuffle(idx);
        const auto n_val = static_cast<std::size_t>(
            std::llround(validation_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n_val && i < idx.size(); ++i) is_validation[idx[i]] = 1;
    }
    for (std::size_t i = 0; i < out.source_pool.size(); ++i) {
        (is_validation[i] ? out.validation : out.train).push_back(out.source_pool[i]);
    }
    return out;
}

}  // namespace fond
