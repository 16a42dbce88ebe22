#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "vesselrepair/vesselrepair.h"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

struct Failure {
    vr_status status;
    std::string message;
};

struct Options {
    int threads = 0;
    bool quiet = false;
    std::string config_path;
    std::vector<std::string> sets;
    std::string format = "nii";
};

class Log {
public:
    explicit Log(bool quiet) : quiet_(quiet), start_(std::chrono::steady_clock::now()) {}
    void info(const std::string& event, ojson fields = ojson::object()) const {
        if (!quiet_) emit("info", event, std::move(fields));
    }
    void error(const std::string& event, ojson fields) const { emit("error", event, std::move(fields)); }

private:
    void emit(const char* level, const std::string& event, ojson fields) const {
        ojson line;
        line["level"] = level;
        line["event"] = event;
        line["elapsed_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
        for (auto& [k, v] : fields.items()) line[k] = v;
        std::cerr << line.dump() << '\n';
    }
    bool quiet_;
    std::chrono::steady_clock::time_point start_;
};

void check(vr_status s) {
    if (s != VR_OK) throw Failure{s, vr_last_error()};
}

std::string take(char* s) {
    std::string out = s ? s : "";
    vr_string_free(s);
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{VR_ERR_IO, "cannot read " + path};
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Failure{VR_ERR_IO, "cannot write " + path.string()};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Failure{VR_ERR_IO, "cannot create " + dir.string() + ": " + ec.message()};
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};
using VolumeH = Handle<vr_volume, vr_volume_free>;
using ConfigH = Handle<vr_config, vr_config_free>;
using ReconnectH = Handle<vr_reconnect_result, vr_reconnect_free>;
using ReconstructH = Handle<vr_reconstruct_result, vr_reconstruct_free>;

void load(VolumeH& v, const std::string& path, vr_kind kind) { check(vr_volume_load(path.c_str(), kind, v.out())); }

std::string volume_name(const std::string& stem, const Options& o) {
    return o.format == "raw" ? stem + ".json" : stem + ".nii";
}

// Config file first, then --set assignments and named flags in order.
void build_config(ConfigH& c, const Options& o, const std::vector<std::string>& extra) {
    if (o.config_path.empty())
        check(vr_config_default(c.out()));
    else
        check(vr_config_load(o.config_path.c_str(), c.out()));
    for (const auto& s : o.sets) check(vr_config_set(c.get(), s.c_str()));
    for (const auto& s : extra) check(vr_config_set(c.get(), s.c_str()));
}

int exit_code(vr_status s) { return s == VR_ERR_INTERNAL ? kExitInternal : kExitInput; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vessel segmentation repair: centerline reconnection, lumen reconstruction and topology metrics"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--threads", opt.threads, "Worker thread cap (0 = hardware)")->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", opt.quiet, "Suppress info logs");
    app.add_option("--config", opt.config_path, "JSON pipeline config")->check(CLI::ExistingFile);
    app.add_option("--set", opt.sets, "Config override section.key=value (repeatable)");
    app.add_option("--format", opt.format, "Output volume format")->check(CLI::IsMember({"nii", "raw"}));

    std::vector<std::string> named;
    auto named_flag = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [&named, key](const std::string& v) { named.push_back(key + "=" + v); },
                                              help);
    };

    std::string image, mask, gt, out_dir, refined, stitches, pred, centerlines, spec, case_name, input, out_file;
    bool stl = false, suite = false;
    int max_lags = -1;

    auto* rc = app.add_subcommand("reconnect", "Reconnect broken branches of a vessel mask");
    rc->add_option("--image", image, "Intensity volume")->required();
    rc->add_option("--mask", mask, "Binary segmentation")->required();
    rc->add_option("--gt", gt, "Ground-truth mask for reconnection counts");
    rc->add_option("--out", out_dir, "Output directory")->required();
    named_flag(rc, "--omega", "reconnect.walk.omega", "Curvature weight");
    named_flag(rc, "--neighbor-level", "reconnect.walk.neighbor_level", "first|second");
    named_flag(rc, "--tree-components", "reconnect.tree_components", "Components treated as the connected tree");
    named_flag(rc, "--oracle", "reconnect.oracle_kind", "linear|percentile");
    named_flag(rc, "--threshold", "reconnect.evaluation.threshold", "Acceptance threshold");

    auto* rs = app.add_subcommand("reconstruct", "Reconstruct lumen geometry along stitched centerlines");
    rs->add_option("--image", image, "Intensity volume")->required();
    rs->add_option("--refined", refined, "Refined mask from reconnect")->required();
    rs->add_option("--stitches", stitches, "Stitch or branch JSON lines");
    rs->add_option("--out", out_dir, "Output directory")->required();
    rs->add_flag("--stl", stl, "Also write the reconstructed surface as binary STL");
    named_flag(rs, "--n-rays", "lumen.n_policy.fixed", "Contour points per section");

    auto* me = app.add_subcommand("metrics", "Compare a mask against ground truth");
    me->add_option("--pred", pred, "Predicted mask")->required();
    me->add_option("--gt", gt, "Ground-truth mask")->required();
    me->add_option("--centerlines", centerlines, "Reference centerline JSON lines (enables OV)");
    me->add_option("--out", out_file, "Write the report here instead of stdout");
    named_flag(me, "--R", "metrics.R", "NSDT cap");
    named_flag(me, "--alpha", "metrics.alpha", "Joint loss balance");

    auto* ph = app.add_subcommand("phantom", "Generate synthetic phantom cases");
    auto* ph_spec = ph->add_option("--spec", spec, "Phantom spec JSON file")->check(CLI::ExistingFile);
    auto* ph_suite = ph->add_flag("--suite", suite, "Write the standard suite");
    auto* ph_case = ph->add_option("--case", case_name, "Built-in case name");
    ph_spec->excludes(ph_suite)->excludes(ph_case);
    ph_suite->excludes(ph_case);
    ph->add_option("--out", out_dir, "Output directory")->required();

    auto* st = app.add_subcommand("stats", "Statistical tests");
    st->require_subcommand(1);
    auto* adf = st->add_subcommand("adf", "Augmented Dickey-Fuller test with constant");
    adf->add_option("--input", input, "Series: JSON array or one number per line")->required();
    adf->add_option("--max-lags", max_lags, "Lag bound (negative = default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    const Log log(opt.quiet);
    try {
        vr_set_threads(opt.threads);
        ConfigH config;
        build_config(config, opt, named);

        if (rc->parsed()) {
            VolumeH img, m, g;
            load(img, image, VR_KIND_INTENSITY);
            load(m, mask, VR_KIND_MASK);
            if (!gt.empty()) load(g, gt, VR_KIND_MASK);
            log.info("reconnect.start", {{"image", image}, {"mask", mask}});
            ReconnectH r;
            check(vr_reconnect(img.get(), m.get(), config.get(), g.get(), r.out()));
            ensure_dir(out_dir);
            VolumeH refined_mask;
            check(vr_reconnect_refined(r.get(), refined_mask.out()));
            const fs::path dir(out_dir);
            check(vr_volume_save(refined_mask.get(), (dir / volume_name("refined_mask", opt)).string().c_str(), "u8"));
            char* s = nullptr;
            check(vr_reconnect_stitches_jsonl(r.get(), &s));
            write_text(dir / "stitches.jsonl", take(s));
            check(vr_reconnect_branches_jsonl(r.get(), &s));
            write_text(dir / "branches.jsonl", take(s));
            check(vr_reconnect_report_json(r.get(), &s));
            const std::string report = take(s);
            write_text(dir / "report.json", report + "\n");
            check(vr_config_to_json(config.get(), &s));
            write_text(dir / "config.json", take(s));
            int n = 0;
            check(vr_reconnect_stitch_count(r.get(), &n));
            log.info("reconnect.done", {{"stitches", n}, {"out", out_dir}});
        } else if (rs->parsed()) {
            VolumeH img, ref;
            load(img, image, VR_KIND_INTENSITY);
            load(ref, refined, VR_KIND_MASK);
            const std::string lines = stitches.empty() ? std::string() : read_text(stitches);
            log.info("reconstruct.start", {{"image", image}, {"refined", refined}});
            ReconstructH r;
            check(vr_reconstruct(img.get(), ref.get(), lines.c_str(), config.get(), stl ? 1 : 0, r.out()));
            ensure_dir(out_dir);
            const fs::path dir(out_dir);
            VolumeH final_mask;
            check(vr_reconstruct_final(r.get(), final_mask.out()));
            check(vr_volume_save(final_mask.get(), (dir / volume_name("final_mask", opt)).string().c_str(), "u8"));
            char* s = nullptr;
            check(vr_reconstruct_contours_jsonl(r.get(), &s));
            write_text(dir / "contours.jsonl", take(s));
            if (stl) check(vr_reconstruct_write_stl(r.get(), (dir / "surface.stl").string().c_str()));
            int tubes = 0, comps = 0;
            check(vr_reconstruct_tube_count(r.get(), &tubes));
            check(vr_volume_count_components(final_mask.get(), &comps));
            log.info("reconstruct.done", {{"tubes", tubes}, {"components", comps}, {"out", out_dir}});
        } else if (me->parsed()) {
            VolumeH p, g;
            load(p, pred, VR_KIND_MASK);
            load(g, gt, VR_KIND_MASK);
            const std::string ref = centerlines.empty() ? std::string() : read_text(centerlines);
            char* s = nullptr;
            check(vr_metrics(p.get(), g.get(), config.get(), centerlines.empty() ? nullptr : ref.c_str(), &s));
            const std::string report = take(s) + "\n";
            if (out_file.empty())
                std::cout << report;
            else
                write_text(out_file, report);
            log.info("metrics.done", {{"pred", pred}, {"gt", gt}});
        } else if (ph->parsed()) {
            if (suite) {
                int n = 0;
                check(vr_phantom_suite(out_dir.c_str(), &n));
                log.info("phantom.suite", {{"cases", n}, {"out", out_dir}});
            } else {
                std::string json;
                if (!spec.empty()) {
                    json = read_text(spec);
                } else if (!case_name.empty()) {
                    char* s = nullptr;
                    check(vr_phantom_spec(case_name.c_str(), &s));
                    json = take(s);
                } else {
                    throw Failure{VR_ERR_INVALID_ARGUMENT, "phantom needs --spec, --case or --suite"};
                }
                check(vr_phantom_generate(json.c_str(), out_dir.c_str()));
                log.info("phantom.case", {{"out", out_dir}});
            }
        } else if (adf->parsed()) {
            const std::string text = read_text(input);
            std::vector<double> series;
            const auto first = text.find_first_not_of(" \t\r\n");
            if (first != std::string::npos && text[first] == '[') {
                try {
                    series = nlohmann::json::parse(text).get<std::vector<double>>();
                } catch (const nlohmann::json::exception& e) {
                    throw Failure{VR_ERR_INVALID_ARGUMENT, std::string("series is not a JSON number array: ") + e.what()};
                }
            } else {
                std::istringstream in(text);
                std::string tok;
                while (in >> tok) {
                    try {
                        std::size_t used = 0;
                        series.push_back(std::stod(tok, &used));
                        if (used != tok.size()) throw std::invalid_argument(tok);
                    } catch (const std::exception&) {
                        throw Failure{VR_ERR_INVALID_ARGUMENT, "not a number: " + tok};
                    }
                }
            }
            double stat = 0, p = 0;
            int lags = 0, nobs = 0;
            check(vr_adf(series.data(), series.size(), max_lags, &stat, &p, &lags, &nobs));
            ojson j;
            j["statistic"] = stat;
            j["p_value"] = p;
            j["lags"] = lags;
            j["n_obs"] = nobs;
            std::cout << j.dump() << '\n';
        }
    } catch (const Failure& f) {
        log.error("failed", {{"status", vr_status_name(f.status)}, {"message", f.message}});
        return exit_code(f.status);
    } catch (const std::exception& e) {
        log.error("failed", {{"status", "Internal"}, {"message", e.what()}});
        return kExitInternal;
    }
    return kExitOk;
}
