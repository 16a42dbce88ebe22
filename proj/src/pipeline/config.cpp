#include "pipeline/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "common/error.hpp"

namespace vr::pipeline {

namespace {

using ojson = nlohmann::ordered_json;

template <class E>
using EnumTable = std::vector<std::pair<E, const char*>>;

const EnumTable<lumen::NPolicyKind> kNPolicy{{lumen::NPolicyKind::Fixed, "fixed"},
                                             {lumen::NPolicyKind::Adaptive, "adaptive"}};
const EnumTable<lumen::SamplingPolicy::Count> kCount{{lumen::SamplingPolicy::Count::Fixed, "fixed"},
                                                     {lumen::SamplingPolicy::Count::ScaledMax, "scaled_max"}};
const EnumTable<recon::NeighborLevel> kLevel{{recon::NeighborLevel::First, "first"},
                                             {recon::NeighborLevel::Second, "second"}};

class Writer {
public:
    ojson root = ojson::object();

    void section(const char* key, const std::function<void()>& body) {
        ojson* parent = current();
        (*parent)[key] = ojson::object();
        stack_.push_back(&(*parent)[key]);
        body();
        stack_.pop_back();
    }
    template <class T>
    void field(const char* key, T& value) {
        (*current())[key] = value;
    }
    template <class E>
    void choice(const char* key, E& value, const EnumTable<E>& table) {
        for (const auto& [e, name] : table)
            if (e == value) (*current())[key] = name;
    }

private:
    ojson* current() { return stack_.empty() ? &root : stack_.back(); }
    std::vector<ojson*> stack_;
};

class Reader {
public:
    explicit Reader(const nlohmann::json& root) { frames_.push_back({&root, "", {}}); }

    void section(const char* key, const std::function<void()>& body) {
        Frame& f = frames_.back();
        if (!f.node->contains(key)) return;
        f.seen.insert(key);
        const auto& child = f.node->at(key);
        const std::string path = join(key);
        if (!child.is_object()) bad(path, "an object");
        frames_.push_back({&child, path, {}});
        body();
        finish();
        frames_.pop_back();
    }

    template <class T>
    void field(const char* key, T& value) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        const std::string path = join(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v->is_boolean()) bad(path, "a boolean");
            value = v->get<bool>();
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0))
                bad(path, "a non-negative integer");
            value = v->get<std::uint64_t>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v->is_number_integer()) bad(path, "an integer");
            const auto x = v->get<std::int64_t>();
            if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) bad(path, "an integer in range");
            value = static_cast<T>(x);
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v->is_number()) bad(path, "a number");
            value = v->get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v->is_string()) bad(path, "a string");
            value = v->get<std::string>();
        } else {
            if (!v->is_array() || v->size() != value.size()) bad(path, "an array of " + std::to_string(value.size()));
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (!(*v)[i].is_number()) bad(path, "an array of numbers");
                value[i] = (*v)[i].template get<double>();
            }
        }
    }

    template <class E>
    void choice(const char* key, E& value, const EnumTable<E>& table) {
        const nlohmann::json* v = take(key);
        if (!v) return;
        std::string names;
        if (v->is_string())
            for (const auto& [e, name] : table)
                if (v->get<std::string>() == name) {
                    value = e;
                    return;
                }
        for (const auto& [e, name] : table) names += (names.empty() ? "" : "|") + std::string(name);
        bad(join(key), "one of " + names);
    }

    void finish() {
        const Frame& f = frames_.back();
        for (const auto& item : f.node->items())
            if (!f.seen.count(item.key())) fail(ErrorCode::ConfigInvalid, "unknown config key: " + join(item.key()));
    }

private:
    struct Frame {
        const nlohmann::json* node;
        std::string path;
        std::set<std::string> seen;
    };

    const nlohmann::json* take(const char* key) {
        Frame& f = frames_.back();
        if (!f.node->contains(key)) return nullptr;
        f.seen.insert(key);
        return &f.node->at(key);
    }
    std::string join(const std::string& key) const {
        const auto& p = frames_.back().path;
        return p.empty() ? key : p + "." + key;
    }
    [[noreturn]] static void bad(const std::string& path, const std::string& what) {
        fail(ErrorCode::ConfigInvalid, "config key " + path + " must be " + what);
    }

    std::vector<Frame> frames_;
};

template <class V>
void visit(V& v, PipelineConfig& c) {
    auto& r = c.reconnect;
    v.section("reconnect", [&] {
        v.field("tree_components", r.tree_components);
        v.field("spur_length", r.spur_length);
        v.field("pass1", r.pass1);
        v.field("pass2", r.pass2);
        v.field("pass3", r.pass3);
        v.field("oracle_kind", r.oracle_kind);
        v.section("selection", [&] {
            auto& s = r.selection;
            v.field("type1_max_distance", s.type1_max_distance);
            v.field("type2_max_distance", s.type2_max_distance);
            v.field("max_proximal_angle", s.max_proximal_angle);
            v.field("positional_cos_cap", s.positional_cos_cap);
            v.field("type3_min_length", s.type3_min_length);
            v.field("type3_short_distance", s.type3_short_distance);
            v.field("type3_long_length", s.type3_long_length);
            v.field("type3_long_distance", s.type3_long_distance);
            v.field("type3_max_positional_angle", s.type3_max_positional_angle);
            v.field("type3_end_margin", s.type3_end_margin);
            v.field("max_pairs_per_branch", s.max_pairs_per_branch);
            v.field("opening_patch", s.opening_patch);
        });
        v.section("walk", [&] {
            auto& w = r.walk;
            v.field("omega", w.omega);
            v.choice("neighbor_level", w.neighbor_level, kLevel);
            v.field("second_level_switch", w.second_level_switch);
            v.field("near_target", w.near_target);
            v.field("max_steps", w.max_steps);
            v.field("side", w.side);
        });
        v.section("evaluation", [&] {
            auto& e = r.evaluation;
            v.field("threshold", e.threshold);
            v.field("extension", e.extension);
            v.field("adf_max_lags", e.adf_max_lags);
        });
        v.section("oracle", [&] {
            auto& o = r.oracle;
            v.field("big_patch", o.big);
            v.field("small_patch", o.small);
            v.field("l2", o.l2);
            v.field("learning_rate", o.learning_rate);
            v.field("iterations", o.iterations);
            v.field("shell", o.shell);
            v.field("centerline_margin", o.centerline_margin);
            v.field("seed", o.seed);
            v.field("radial", o.radial);
        });
    });
    v.section("lumen", [&] {
        auto& p = c.contour;
        v.field("sdf_oracle", c.sdf_oracle);
        v.field("width", p.width);
        v.field("height", p.height);
        v.field("pixel_spacing", p.pixel_spacing);
        v.field("tangent_window", p.tangent_window);
        v.field("center_weights", p.center_weights);
        v.section("n_policy", [&] {
            v.choice("kind", p.n_policy.kind, kNPolicy);
            v.field("fixed", p.n_policy.fixed);
            v.field("cap", p.n_policy.cap);
        });
        v.section("grow", [&] {
            v.field("step", p.grow.step);
            v.field("min_radius", p.grow.min_radius);
            v.field("clamp_factor", p.grow.clamp_factor);
        });
        v.section("sampling", [&] {
            auto& s = c.sampling;
            v.choice("count", s.count, kCount);
            v.field("fixed", s.fixed);
            v.field("factor", s.factor);
            v.field("variance_floor", s.variance_floor);
            v.field("variance_scale", s.variance_scale);
            v.field("spread_is_variance", s.spread_is_variance);
            v.field("seed", s.seed);
        });
    });
    v.section("ies", [&] {
        v.field("support_factor", c.tube.support_factor);
        v.field("cap_margin", c.tube.cap_margin);
    });
    v.section("metrics", [&] {
        v.field("R", c.metrics.R);
        v.field("alpha", c.metrics.alpha);
        v.field("soft_iters", c.metrics.soft_iters);
        v.field("ov_tolerance", c.metrics.ov_tolerance);
    });
}

void check(const PipelineConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorCode::ConfigInvalid, what);
    };
    const auto& r = c.reconnect;
    require(r.tree_components >= 1, "reconnect.tree_components must be at least 1");
    require(r.spur_length >= 0, "reconnect.spur_length must be non-negative");
    require(r.oracle_kind == "linear" || r.oracle_kind == "percentile", "reconnect.oracle_kind must be linear or percentile");
    require(r.selection.max_pairs_per_branch >= 1, "reconnect.selection.max_pairs_per_branch must be at least 1");
    require(r.selection.opening_patch >= 1 && r.selection.opening_patch % 2 == 1,
            "reconnect.selection.opening_patch must be odd and positive");
    require(r.walk.omega >= 0.0, "reconnect.walk.omega must be non-negative");
    require(r.walk.side >= 1, "reconnect.walk.side must be positive");
    require(r.walk.max_steps >= 0, "reconnect.walk.max_steps must be non-negative");
    require(r.evaluation.extension >= 0, "reconnect.evaluation.extension must be non-negative");
    require(r.oracle.big >= 1 && r.oracle.big % 2 == 1 && r.oracle.small >= 1 && r.oracle.small % 2 == 1,
            "reconnect.oracle patch sizes must be odd and positive");
    require(r.oracle.iterations >= 0 && r.oracle.learning_rate > 0.0 && r.oracle.l2 >= 0.0,
            "reconnect.oracle training parameters are out of range");
    require(c.sdf_oracle == "threshold", "lumen.sdf_oracle must be threshold");
    require(c.contour.width > 0 && c.contour.height > 0, "lumen.width and lumen.height must be positive");
    require(c.contour.pixel_spacing >= 0.0, "lumen.pixel_spacing must be non-negative");
    require(c.contour.n_policy.fixed >= 8 && c.contour.n_policy.cap >= 8, "lumen.n_policy counts must be at least 8");
    require(c.contour.grow.step > 0.0 && c.contour.grow.clamp_factor >= 1.0, "lumen.grow parameters are out of range");
    require(c.sampling.fixed >= 0 && c.sampling.factor >= 0.0, "lumen.sampling counts must be non-negative");
    require(c.tube.support_factor > 0.0 && c.tube.cap_margin >= 0.0, "ies parameters are out of range");
    require(c.metrics.R > 0.0, "metrics.R must be positive");
    require(c.metrics.alpha >= 0.0 && c.metrics.alpha <= 1.0, "metrics.alpha must lie in [0, 1]");
    require(c.metrics.soft_iters >= 0 && c.metrics.ov_tolerance >= 0.0, "metrics parameters are out of range");
}

}  // namespace

nlohmann::ordered_json config_to_json(const PipelineConfig& config) {
    PipelineConfig copy = config;
    Writer w;
    visit(w, copy);
    return w.root;
}

std::string config_to_string(const PipelineConfig& config) { return config_to_json(config).dump(2) + "\n"; }

PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config must be a JSON object");
    PipelineConfig c;
    Reader r(j);
    visit(r, c);
    r.finish();
    check(c);
    return c;
}

PipelineConfig config_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_string(ss.str());
}

void apply_override(nlohmann::ordered_json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::ConfigInvalid, "override must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    ojson* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) fail(ErrorCode::ConfigInvalid, "unknown config key: " + key);
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    ojson value;
    try {
        value = ojson::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    *node = value;
}

PipelineConfig with_overrides(const PipelineConfig& base, const std::vector<std::string>& assignments) {
    if (assignments.empty()) return base;
    ojson j = config_to_json(base);
    for (const auto& a : assignments) apply_override(j, a);
    return config_from_json(nlohmann::json::parse(j.dump()));
}

}  // namespace vr::pipeline
