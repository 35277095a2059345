#include "dgs/io/config_io.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dgs {

namespace {

using nlohmann::json;

template <typename Enum>
struct EnumNames;

template <>
struct EnumNames<ImportanceMode> {
    static constexpr std::pair<ImportanceMode, const char*> values[] = {{ImportanceMode::top_k, "topk"},
                                                                        {ImportanceMode::sample, "sample"}};
};

template <>
struct EnumNames<StudentInit> {
    static constexpr std::pair<StudentInit, const char*> values[] = {{StudentInit::from_scratch, "from_scratch"},
                                                                     {StudentInit::warm_start, "warm_start"}};
};

class Writer {
public:
    explicit Writer(json& j) : j_(j) {}

    template <typename T>
    void field(const char* key, const T& value) {
        if constexpr (std::is_same_v<T, Vec3>) {
            j_[key] = {value.x(), value.y(), value.z()};
        } else if constexpr (std::is_enum_v<T>) {
            for (const auto& [v, name] : EnumNames<T>::values) {
                if (v == value) j_[key] = name;
            }
        } else {
            j_[key] = value;
        }
    }

    template <typename Fn>
    void section(const char* key, Fn&& fn) {
        j_[key] = json::object();
        Writer child(j_[key]);
        fn(child);
    }

private:
    json& j_;
};

class Reader {
public:
    Reader(const json& j, std::string path, const std::string& source)
        : j_(j), path_(std::move(path)), source_(source) {
        if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
    }

    template <typename T>
    void field(const char* key, T& value) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        const json& v = j_.at(key);
        const std::string where = qualify(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(where, "expected true or false");
            value = v.get<bool>();
        } else if constexpr (std::is_same_v<T, Vec3>) {
            if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number()) {
                fail(where, "expected an array of 3 numbers");
            }
            value = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
        } else if constexpr (std::is_enum_v<T>) {
            if (!v.is_string()) fail(where, "expected a string");
            const std::string s = v.get<std::string>();
            for (const auto& [e, name] : EnumNames<T>::values) {
                if (s == name) {
                    value = e;
                    return;
                }
            }
            fail(where, "unknown value '" + s + "'");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(where, "expected a number");
            value = v.get<T>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) fail(where, "expected a non-negative integer");
            value = v.get<T>();
        } else {
            if (!v.is_number_integer()) fail(where, "expected an integer");
            const auto wide = v.get<int64_t>();
            if (wide < std::numeric_limits<T>::min() || wide > std::numeric_limits<T>::max()) {
                fail(where, "integer out of range");
            }
            value = static_cast<T>(wide);
        }
    }

    template <typename Fn>
    void section(const char* key, Fn&& fn) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        Reader child(j_.at(key), qualify(key), source_);
        fn(child);
        child.finish();
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) fail(qualify(item.key().c_str()), "unknown key");
        }
    }

private:
    std::string qualify(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string& where, const std::string& what) const {
        throw IoError(source_ + ": " + where + ": " + what);
    }

    const json& j_;
    std::string path_;
    const std::string& source_;
    std::set<std::string> used_;
};

template <typename V>
void visit(V& v, auto& c) {
    v.section("train", [&](V& t) {
        auto& train = c.pipeline.train;
        t.field("total_iters", train.total_iters);
        t.field("sh_degree", train.sh_degree);
        t.field("sh_degree_interval", train.sh_degree_interval);
        t.field("seed", train.seed);
        t.field("background", train.background);
        t.field("num_threads", train.num_threads);
        t.field("checkpoint_interval", train.checkpoint_interval);
        t.section("lr", [&](V& s) {
            s.field("position_init", train.lr.position_init);
            s.field("position_final", train.lr.position_final);
            s.field("sh_dc", train.lr.sh_dc);
            s.field("sh_rest_divisor", train.lr.sh_rest_divisor);
            s.field("opacity", train.lr.opacity);
            s.field("scale", train.lr.scale);
            s.field("rotation", train.lr.rotation);
        });
        t.section("loss", [&](V& s) {
            s.field("lambda_dssim", train.loss.lambda_dssim);
            s.field("lambda_kd", train.loss.lambda_kd);
        });
        t.section("densify", [&](V& s) {
            s.field("from_iter", train.densify.from_iter);
            s.field("until_iter", train.densify.until_iter);
            s.field("interval", train.densify.interval);
            s.field("grad_threshold", train.densify.grad_threshold);
            s.field("percent_dense", train.densify.percent_dense);
            s.field("split_scale_factor", train.densify.split_scale_factor);
            s.field("opacity_prune_threshold", train.densify.opacity_prune_threshold);
            s.field("opacity_reset_interval", train.densify.opacity_reset_interval);
            s.field("max_gaussians", train.densify.max_gaussians);
        });
        t.section("perturb", [&](V& s) {
            s.field("enabled", train.perturb.enabled);
            s.field("t_start", train.perturb.t_start);
            s.field("t_end", train.perturb.t_end);
            s.field("interval", train.perturb.interval);
            s.field("sigma_position", train.perturb.sigma_position);
            s.field("sigma_rotation", train.perturb.sigma_rotation);
            s.field("sigma_scale", train.perturb.sigma_scale);
            s.field("sigma_opacity", train.perturb.sigma_opacity);
        });
        t.section("dropout", [&](V& s) {
            s.field("enabled", train.dropout.enabled);
            s.field("r_init", train.dropout.r_init);
            s.field("t0", train.dropout.t0);
            s.field("t1", train.dropout.t1);
        });
    });
    v.section("student", [&](V& s) {
        auto& st = c.pipeline.student;
        s.field("budget", st.budget);
        s.field("prune_iter", st.prune_iter);
        s.field("second_prune_iter", st.second_prune_iter);
        s.field("importance", st.importance);
        s.field("init", st.init);
        s.field("hist_enabled", st.hist_enabled);
        s.field("hist_interval", st.hist_interval);
        s.field("hist_weight", st.hist_weight);
        s.field("hist_grid", st.hist_grid);
    });
    v.section("synthetic", [&](V& s) {
        auto& sy = c.synthetic;
        s.field("gaussians", sy.gaussians);
        s.field("cameras", sy.cameras);
        s.field("width", sy.width);
        s.field("height", sy.height);
        s.field("ring_radius", sy.ring_radius);
        s.field("elevation", sy.elevation);
        s.field("focal", sy.focal);
        s.field("init_points", sy.init_points);
    });
}

} // namespace

ToolConfig parse_config(std::string_view text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(source + ": " + e.what());
    }
    ToolConfig config;
    Reader reader(root, "", source);
    visit(reader, config);
    reader.finish();
    return config;
}

ToolConfig load_config(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw IoError(path.string() + ": cannot open");
    std::ostringstream text;
    text << file.rdbuf();
    ToolConfig config = parse_config(text.str(), path.string());
    try {
        config.pipeline.train.validate();
        config.pipeline.student.validate(config.pipeline.train);
        config.synthetic.validate();
    } catch (const ContractError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return config;
}

std::string config_to_json(const ToolConfig& config) {
    json root = json::object();
    Writer writer(root);
    visit(writer, config);
    return root.dump(2);
}

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ull;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t config_hash(const ToolConfig& config) { return fnv1a64(config_to_json(config)); }

} // namespace dgs
