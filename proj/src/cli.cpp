#include "pcnn/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pcnn/activation.hpp"
#include "pcnn/convexity.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/error.hpp"
#include "pcnn/training.hpp"

namespace pcnn::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kAllFlags = {
    "dataset", "model",  "activation", "shift",      "hidden", "epochs", "lr",
    "base",    "b",      "eps",        "seed",       "adjacency", "out", "checkpoint",
    "split",   "probes", "psd-points", "width",      "points", "shifts", "threads"};

const std::map<std::string, std::set<std::string>> kAllowed = {
    {"train",
     {"dataset", "model", "activation", "shift", "hidden", "epochs", "lr", "base", "b", "eps",
      "seed", "adjacency", "out"}},
    {"eval", {"dataset", "checkpoint", "model", "b", "eps", "adjacency", "split", "seed"}},
    {"verify",
     {"model", "activation", "shift", "probes", "psd-points", "width", "base", "seed", "out"}},
    {"metric", {"activation", "shift", "points", "seed"}},
    {"sweep",
     {"dataset", "model", "shifts", "hidden", "epochs", "lr", "base", "b", "eps", "seed",
      "adjacency", "out", "threads"}},
};

class Flags {
public:
    explicit Flags(const CliInvocation& inv) : flags_(inv.flags) {}

    std::string str(const std::string& key, const std::string& fallback) const {
        auto it = flags_.find(key);
        return it == flags_.end() ? fallback : it->second;
    }

    std::string required(const std::string& key) const {
        auto it = flags_.find(key);
        if (it == flags_.end()) throw UsageError("--" + key + " is required");
        return it->second;
    }

    double real(const std::string& key, double fallback) const {
        auto it = flags_.find(key);
        if (it == flags_.end()) return fallback;
        return parse_real(key, it->second);
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        auto it = flags_.find(key);
        if (it == flags_.end()) return fallback;
        const std::string& s = it->second;
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw UsageError("--" + key + " expects a nonnegative integer, got '" + s + "'");
        }
        return v;
    }

    static double parse_real(const std::string& key, const std::string& s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) {
            throw UsageError("--" + key + " expects a number, got '" + s + "'");
        }
        return v;
    }

private:
    std::map<std::string, std::string> flags_;
};

Activation activation_from(const Flags& f) {
    const std::string name = f.str("activation", "softplus");
    const auto kind = parse_activation_kind(name);
    if (!kind) throw UsageError("--activation must be relu, softplus or bend, got '" + name + "'");
    const double shift = f.real("shift", 0.0);
    if (shift < 0.0) throw UsageError("--shift must be >= 0");
    return Activation(*kind, shift);
}

AdjacencyMode adjacency_from(const Flags& f) {
    const std::string mode = f.str("adjacency", "sym");
    if (mode == "sym" || mode == "self-loop-symmetric") return AdjacencyMode::self_loop_symmetric;
    if (mode == "raw") return AdjacencyMode::raw;
    throw UsageError("--adjacency must be raw or sym, got '" + mode + "'");
}

ModelKind model_kind_from(const Flags& f) {
    const std::string model = f.str("model", "egcn");
    if (model == "egcn") return ModelKind::egcn;
    if (model == "emlp") return ModelKind::emlp;
    throw UsageError("--model must be egcn or emlp, got '" + model + "'");
}

TrainConfig train_config_from(const Flags& f) {
    TrainConfig c;
    c.model = model_kind_from(f);
    c.activation = activation_from(f);
    c.hidden_width = f.count("hidden", 16);
    c.epochs = f.count("epochs", 200);
    c.learning_rate = f.real("lr", 0.01);
    c.base = f.real("base", 2.0);
    c.preprocess = {f.real("b", 2.0), f.real("eps", 0.1)};
    c.seed = f.count("seed", 1);
    c.adjacency = adjacency_from(f);
    return c;
}

fs::path out_dir(const Flags& f) {
    fs::path dir = f.str("out", "out");
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream o(path, std::ios::trunc);
    if (!o) throw FormatError("cli: cannot write " + path.string());
    o << text;
}

int run_train(const Flags& f, std::ostream& out) {
    const TrainConfig config = train_config_from(f);
    const GraphDataset dataset = load_dataset(f.required("dataset"));
    const fs::path dir = out_dir(f);
    const TrainResult result = train(dataset, config);
    write_checkpoint(to_checkpoint(result.best), dir / "checkpoint.pcnm");
    write_text(dir / "history.csv", result.history.to_csv());
    out << result.history.summary() << "\n";
    return kOk;
}

int run_eval(const Flags& f, std::ostream& out) {
    const GraphDataset dataset = load_dataset(f.required("dataset"));
    const Checkpoint cp = read_checkpoint(f.required("checkpoint"));
    const Model model = model_kind_from(f) == ModelKind::egcn ? Model{egcn_from_checkpoint(cp)}
                                                             : Model{emlp_from_checkpoint(cp)};
    const PreparedGraph graph =
        prepare_graph(dataset, {f.real("b", 2.0), f.real("eps", 0.1)}, adjacency_from(f));
    const std::string split = f.str("split", "test");
    const std::vector<std::uint32_t>* mask = nullptr;
    if (split == "train") mask = &graph.train_mask;
    if (split == "val") mask = &graph.val_mask;
    if (split == "test") mask = &graph.test_mask;
    if (!mask) throw UsageError("--split must be train, val or test, got '" + split + "'");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "accuracy: %.6f", evaluate(model, graph, *mask));
    out << buf << "\n";
    return kOk;
}

int run_verify(const Flags& f, std::ostream& out) {
    VerifyConfig config;
    const std::string model = f.str("model", "emlp2");
    if (model == "emlp2") {
        config.target = VerifyTarget::emlp2;
    } else if (model == "egcn2") {
        config.target = VerifyTarget::egcn2;
    } else if (model == "mlp2") {
        config.target = VerifyTarget::mlp2;
    } else {
        throw UsageError("--model for verify must be emlp2, egcn2 or mlp2, got '" + model + "'");
    }
    config.activation = activation_from(f);
    config.base = f.real("base", 2.0);
    config.width = f.count("width", 3);
    config.probes = f.count("probes", 1000);
    config.psd_points = f.count("psd-points", 100);
    config.seed = f.count("seed", 1);
    if (config.width == 0 || config.probes == 0 || config.psd_points == 0) {
        throw UsageError("--width, --probes and --psd-points must be >= 1");
    }
    const ConvexityReport report = run_verification(config);
    const std::string text = report.to_text();
    write_text(out_dir(f) / "verify_report.txt", text);
    out << text;
    return report.verdict == Verdict::violation_found ? kViolationFound : kOk;
}

int run_metric(const Flags& f, std::ostream& out) {
    const Activation act = activation_from(f);
    const auto points = f.count("points", 64);
    if (points < 16) throw UsageError("--points must be >= 16");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", convexity_metric_integral(act, points));
    out << buf << "\n";
    return kOk;
}

int run_sweep(const Flags& f, std::ostream& out) {
    const TrainConfig config = train_config_from(f);
    std::vector<double> shifts;
    std::stringstream list(f.str("shifts", "0,25,50,75,99"));
    for (std::string item; std::getline(list, item, ',');) {
        if (!item.empty()) shifts.push_back(Flags::parse_real("shifts", item));
    }
    if (shifts.empty()) throw UsageError("--shifts needs at least one value");
    const GraphDataset dataset = load_dataset(f.required("dataset"));
    const fs::path dir = out_dir(f);
    const auto rows = sweep_convexity(dataset, config, shifts, f.count("threads", 1));
    const std::string csv = sweep_to_csv(rows);
    write_text(dir / "sweep.csv", csv);
    out << csv;
    return kOk;
}

}  // namespace

std::string usage() {
    return "usage: pcnn <train|eval|verify|metric|sweep> [--flag value ...] [--config file]\n"
           "  train   --dataset DIR [--model egcn|emlp] [--activation relu|softplus|bend]\n"
           "          [--shift C] [--hidden N] [--epochs N] [--lr R] [--base A] [--b B]\n"
           "          [--eps E] [--seed S] [--adjacency sym|raw] [--out DIR]\n"
           "  eval    --dataset DIR --checkpoint FILE [--model egcn|emlp] [--b B] [--eps E]\n"
           "          [--adjacency sym|raw] [--split train|val|test]\n"
           "  verify  [--model emlp2|egcn2|mlp2] [--activation ...] [--shift C] [--probes N]\n"
           "          [--psd-points N] [--width N] [--base A] [--seed S] [--out DIR]\n"
           "  metric  --activation relu|softplus|bend [--shift C] [--points N]\n"
           "  sweep   --dataset DIR [--shifts c1,c2,...] [--threads N] plus train flags\n"
           "Config files hold key=value lines named like the flags; flags take precedence.\n";
}

CliInvocation parse_invocation(const std::vector<std::string>& args) {
    CLI::App app{"pcnn"};
    app.set_help_flag();
    std::string subcommand;
    app.add_option("subcommand", subcommand)->required();
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    for (const auto& name : kAllFlags) {
        options[name] = app.add_option("--" + name, values[name]);
    }
    auto* config = app.set_config("--config");
    config->required(false);
    app.allow_config_extras(false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    CliInvocation inv;
    inv.subcommand = subcommand;
    const auto allowed = kAllowed.find(subcommand);
    if (allowed == kAllowed.end()) throw UsageError("unknown subcommand '" + subcommand + "'");
    for (const auto& [name, option] : options) {
        if (option->count() == 0) continue;
        if (!allowed->second.contains(name)) {
            throw UsageError("--" + name + " does not apply to '" + subcommand + "'");
        }
        inv.flags[name] = values[name];
    }
    if (config->count() > 0) inv.config_path = config->as<std::string>();
    return inv;
}

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
    const Flags flags(inv);
    try {
        if (inv.subcommand == "train") return run_train(flags, out);
        if (inv.subcommand == "eval") return run_eval(flags, out);
        if (inv.subcommand == "verify") return run_verify(flags, out);
        if (inv.subcommand == "metric") return run_metric(flags, out);
        if (inv.subcommand == "sweep") return run_sweep(flags, out);
        err << "error: unknown subcommand '" << inv.subcommand << "'\n" << usage();
        return kUsageError;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << usage();
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty() || args.front() == "--help" || args.front() == "-h") {
        (args.empty() ? err : out) << usage();
        return args.empty() ? kUsageError : kOk;
    }
    CliInvocation inv;
    try {
        inv = parse_invocation(args);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << usage();
        return kUsageError;
    }
    return run(inv, out, err);
}

}  // namespace pcnn::cli
