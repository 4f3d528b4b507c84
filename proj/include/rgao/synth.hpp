#pragma once

// Deterministic synthetic corpora: a fixed 2002-node benchmark repository,
// and small themed repositories shaped for each routing label (used to build
// the labeled routing dataset). Everything derives from explicit seeds so
// dataset files are byte-identical across runs.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "rgao/common.hpp"
#include "rgao/router.hpp"

namespace rgao {

// Scratch directory that cleans up after itself.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "rgao") {
        static std::atomic<std::uint64_t> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / (prefix + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

namespace detail {

inline void write_text(const std::filesystem::path& file, const std::string& content) {
    std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << content;
}

inline std::string pad3(std::size_t n) {
    std::string s = std::to_string(n);
    return std::string(3 - std::min<std::size_t>(3, s.size()), '0') + s;
}

}  // namespace detail

// --- fixed benchmark corpus ---------------------------------------------------

// 200 packages, one module each, eight symbols per module (nine in the
// first): two imports, one variable, two functions, one class with two
// methods. Indexing it yields exactly 2002 nodes: 1 root + 200 directories
// + 200 files + 1601 symbols. Cross-package imports and calls form a ring.
inline constexpr std::size_t kBenchPackages = 200;
inline constexpr std::size_t kBenchNodeCount = 2002;

inline void materialize_bench_corpus(const std::filesystem::path& root) {
    for (std::size_t i = 0; i < kBenchPackages; ++i) {
        const std::string xxx = detail::pad3(i);
        const std::string yyy = detail::pad3((i + 1) % kBenchPackages);
        std::ostringstream py;
        py << "\"\"\"Support module " << xxx << " of the benchmark tier.\"\"\"\n"
           << "import dep_registry\n"
           << "from mod_" << yyy << " import fn_" << yyy << "_0\n"
           << "MOD_ID = " << i << "\n"
           << "\n\n"
           << "def fn_" << xxx << "_0(value):\n"
           << "    \"\"\"Computes stage zero for module " << xxx << ".\"\"\"\n"
           << "    total = value + MOD_ID\n"
           << "    return fn_" << yyy << "_0(total)\n"
           << "\n\n"
           << "def fn_" << xxx << "_1(value):\n"
           << "    \"\"\"Computes stage one for module " << xxx << ".\"\"\"\n"
           << "    return fn_" << xxx << "_0(value) * 2\n"
           << "\n\n"
           << "class Worker_" << xxx << ":\n"
           << "    \"\"\"Worker for module " << xxx << ".\"\"\"\n"
           << "\n"
           << "    def setup(self):\n"
           << "        \"\"\"Prepares worker state.\"\"\"\n"
           << "        return MOD_ID\n"
           << "\n"
           << "    def run(self, value):\n"
           << "        \"\"\"Runs the staged computation.\"\"\"\n"
           << "        return fn_" << xxx << "_1(value)\n";
        if (i == 0) {
            py << "\n\n"
               << "def fn_000_extra(value):\n"
               << "    \"\"\"Extra helper in the first module.\"\"\"\n"
               << "    return value\n";
        }
        detail::write_text(root / ("pkg_" + xxx) / ("mod_" + xxx + ".py"), py.str());
    }
}

// --- themed routing repositories ------------------------------------------------

namespace detail {

inline const std::vector<std::string>& themes() {
    static const std::vector<std::string> v = {"billing", "inventory", "session", "parser",
                                               "cache",   "mailer",    "catalog", "profile",
                                               "orders",  "metrics"};
    return v;
}
inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"compute", "load",   "merge", "format", "resolve",
                                               "sync",    "encode", "trim",  "rank",   "split"};
    return v;
}
inline const std::vector<std::string>& nouns() {
    static const std::vector<std::string> v = {"total",  "record", "token",  "report", "batch",
                                               "entry",  "digest", "window", "bucket", "chain"};
    return v;
}

inline std::string pick_other(Rng& rng, const std::vector<std::string>& pool,
                              const std::string& not_this) {
    for (int i = 0; i < 16; ++i) {
        const std::string& s = pool[rng.below(pool.size())];
        if (s != not_this) return s;
    }
    return pool.front() == not_this ? pool.back() : pool.front();
}

// Docstring carrying the task phrasing: the task text with the identifier
// mention removed. This is what gives the intended symbol its margin.
inline std::string doc_from_task(const std::string& task, const std::string& target) {
    std::ostringstream out;
    std::istringstream in(task);
    std::string word;
    bool first = true;
    while (in >> word) {
        if (!target.empty() && word.find(target) != std::string::npos) continue;
        if (!first) out << ' ';
        std::string w = word;
        if (first && !w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        out << w;
        first = false;
    }
    std::string s = out.str();
    if (!s.empty() && s.back() != '.') s += '.';
    return s;
}

}  // namespace detail

struct RepoPlan {
    std::uint32_t files = 0;
    std::uint32_t cross_edges = 0;
    std::uint32_t depth = 0;
    std::string target_name;  // intended symbol; empty for research-shaped repos
};

// Writes the repository shaped for `oracle` under `root`. The shape controls
// what the complexity extractor sees: file span, dependency depth,
// cross-directory coupling, and (for research repositories) a score tie that
// maximizes ambiguity.
inline RepoPlan materialize_routing_repo(const std::filesystem::path& root, Topology oracle,
                                         std::uint64_t seed, const std::string& task,
                                         const std::string& target, const std::string& theme) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    RepoPlan plan;
    plan.target_name = target;
    const std::string doc = detail::doc_from_task(task, target);

    switch (oracle) {
        case Topology::FastPath: {
            std::string d1 = detail::pick_other(rng, detail::verbs(), "") + "_" +
                             detail::pick_other(rng, detail::nouns(), "") + "_" + theme;
            if (d1 == target) d1 += "_alt";
            std::ostringstream py;
            py << "\"\"\"Helpers for the " << theme << " area.\"\"\"\n\n\n"
               << "def " << target << "(value):\n"
               << "    \"\"\"" << doc << "\"\"\"\n"
               << "    return value * 3\n\n\n"
               << "def " << d1 << "(value):\n"
               << "    \"\"\"Keeps a side ledger tidy.\"\"\"\n"
               << "    return value - 1\n";
            detail::write_text(root / "app.py", py.str());
            plan.files = 1;
            plan.cross_edges = 0;
            plan.depth = 2;
            break;
        }
        case Topology::SubAgent: {
            // The intended symbol is the load-bearing callee: a sibling module
            // imports and calls it twice, so the degree and importance signals
            // stack on it rather than on a decoy. Decoy docstrings share no
            // vocabulary with the task templates.
            std::string noun = detail::pick_other(rng, detail::nouns(), "");
            std::string w1 = "stage_" + noun + "_step";
            std::string w2 = "drain_" + noun + "_step";
            std::string side = detail::pick_other(rng, detail::verbs(), "") + "_spare_ledger";
            std::ostringstream flow;
            flow << "\"\"\"Flow logic, " << theme << " area.\"\"\"\n\n\n"
                 << "def " << target << "(value):\n"
                 << "    \"\"\"" << doc << "\"\"\"\n"
                 << "    return value * 3\n\n\n"
                 << "def " << side << "(value):\n"
                 << "    \"\"\"Keeps a spare ledger tidy.\"\"\"\n"
                 << "    return value - 1\n";
            std::ostringstream store;
            store << "\"\"\"Storage wiring, " << theme << " area.\"\"\"\n"
                  << "from flow import " << target << "\n\n\n"
                  << "def " << w1 << "(value):\n"
                  << "    \"\"\"Stages one pending row.\"\"\"\n"
                  << "    return " << target << "(value) + 1\n\n\n"
                  << "def " << w2 << "(value):\n"
                  << "    \"\"\"Drains one pending row.\"\"\"\n"
                  << "    return " << target << "(value) - 1\n";
            detail::write_text(root / "core" / "flow.py", flow.str());
            detail::write_text(root / "core" / "store.py", store.str());
            plan.files = 2;
            plan.cross_edges = 0;
            plan.depth = 3;
            break;
        }
        case Topology::MultiAgent: {
            // Three service symbols (the intended one among them), each
            // imported and called from a library wrapper in a different
            // directory: six files, three cross-directory edges, and the
            // importance signals concentrated on the callee side.
            struct FileSpec {
                const char* dir;
                const char* file;
                std::string def;
                std::string doc;
                std::string callee;  // from-imported and called (lib side)
                const char* from;    // module named in the import line
            };
            std::string n2 = detail::pick_other(rng, detail::nouns(), "");
            std::string n3 = detail::pick_other(rng, detail::nouns(), n2);
            std::string serve = "serve_" + n2 + "_" + theme;
            std::string queue = "spool_" + n3 + "_" + theme;
            std::vector<FileSpec> files = {
                {"svc", "flow.py", target, doc, "", ""},
                {"svc", "api.py", serve, "Serves one shaped payload.", "", ""},
                {"svc", "jobs.py", queue, "Drains one queued payload.", "", ""},
                {"lib", "model.py", "wrap_" + n2 + "_probe", "Wraps a downstream payload.", target, "flow"},
                {"lib", "parts.py", "shape_" + n2 + "_probe", "Shapes a downstream payload.", serve, "api"},
                {"lib", "spool.py", "pack_" + n3 + "_probe", "Packs a downstream payload.", queue, "jobs"},
            };
            for (std::size_t i = 0; i < files.size(); ++i) {
                const auto& f = files[i];
                std::ostringstream py;
                py << "\"\"\"" << (i < 3 ? "Service" : "Library") << " side, " << theme
                   << " area.\"\"\"\n";
                if (!f.callee.empty()) py << "from " << f.from << " import " << f.callee << "\n";
                py << "\n\n"
                   << "def " << f.def << "(value):\n"
                   << "    \"\"\"" << f.doc << "\"\"\"\n";
                if (!f.callee.empty()) {
                    py << "    staged = " << f.callee << "(value)\n"
                       << "    return staged + 1\n";
                } else {
                    py << "    return value * 2\n";
                }
                detail::write_text(root / f.dir / f.file, py.str());
            }
            plan.files = 6;
            plan.cross_edges = 3;
            plan.depth = 3;
            break;
        }
        case Topology::DeepResearch: {
            // Two files, four functions with identical docstrings and
            // identical body shapes: the top scores tie exactly, so the
            // query margin collapses no matter how it is phrased.
            const char* shared_doc = "Maintains internal tallies.";
            auto emit = [&](const char* file, const char* n1, const char* n2) {
                std::ostringstream py;
                py << "\"\"\"Bookkeeping pieces.\"\"\"\n\n\n"
                   << "def " << n1 << "(value):\n"
                   << "    \"\"\"" << shared_doc << "\"\"\"\n"
                   << "    return value + 1\n\n\n"
                   << "def " << n2 << "(value):\n"
                   << "    \"\"\"" << shared_doc << "\"\"\"\n"
                   << "    return value + 1\n";
                detail::write_text(root / "core" / file, py.str());
            };
            emit("alpha.py", "handle_window_alpha", "handle_bucket_gamma");
            emit("omega.py", "handle_ledger_delta", "handle_stream_omega");
            plan.files = 2;
            plan.cross_edges = 0;
            plan.depth = 3;
            plan.target_name.clear();
            break;
        }
    }
    return plan;
}

// --- labeled routing dataset ------------------------------------------------------

struct RoutingInstance {
    std::string id;
    std::string task;
    std::uint64_t repo_seed = 0;
    Topology oracle = Topology::FastPath;
    bool adversarial = false;
    std::string split;  // "tune" or "eval"
    std::string theme;
    std::string target_name;  // ground-truth symbol; empty for research rows
    RepoPlan plan;            // files / cross_edges / depth metadata
};

// Largest-remainder apportionment with a floating-point guard on the floor.
// Ties go to the larger remainder, then to the larger index.
inline std::vector<std::uint64_t> apportion(std::uint64_t total, const std::vector<double>& weights) {
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("apportion: negative weight");
        wsum += w;
    }
    if (wsum <= 0.0) throw std::invalid_argument("apportion: weights sum to zero");
    std::vector<std::uint64_t> out(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double quota = static_cast<double>(total) * weights[i] / wsum;
        auto fl = static_cast<std::uint64_t>(std::floor(quota + 1e-9));
        out[i] = fl;
        assigned += fl;
        // Quantize so near-ties from binary fractions (0.29 * 250 vs 0.21 * 250)
        // resolve through the deterministic index rule, not float noise.
        double rem = std::round((quota - static_cast<double>(fl)) * 1e9) / 1e9;
        remainders.emplace_back(rem, i);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second > b.second;
    });
    for (std::size_t s = 0; assigned < total; ++s, ++assigned) {
        ++out[remainders[s % remainders.size()].second];
    }
    return out;
}

namespace detail {

struct TaskTemplate {
    std::string text;  // with {target} / {theme} / {vague} slots
};

inline std::string fill(std::string t, const std::string& key, const std::string& value) {
    std::size_t at;
    while ((at = t.find(key)) != std::string::npos) t.replace(at, key.size(), value);
    return t;
}

inline const std::vector<std::string>& vague_phrases() {
    static const std::vector<std::string> v = {
        "the nightly rollout stalls under bursty shards",
        "checkout spikes drift after midweek deploys",
        "cold starts wobble during quota surges",
        "replays hiccup once snapshots overlap",
    };
    return v;
}

// Task templates per label. Non-adversarial phrasings carry the keyword the
// baseline expects; adversarial ones describe the same work with a phrasing
// the keyword table misreads.
inline std::string make_task(Topology oracle, bool adversarial, Rng& rng,
                             const std::string& target, const std::string& theme) {
    auto pick = [&rng](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
    std::string t;
    switch (oracle) {
        case Topology::FastPath:
            t = adversarial ? pick({"fix the docstring typo in {target}",
                                    "review the comment above {target}"})
                            : pick({"update the docstring wording of {target}",
                                    "rename the loop counter inside {target}",
                                    "adjust the comment above {target}"});
            break;
        case Topology::SubAgent:
            t = adversarial ? pick({"investigate the rounding glitch in {target} and fix it",
                                    "explore the edge cases of {target} and fix them"})
                            : pick({"fix the rounding glitch in {target} before release",
                                    "implement input guards for {target}"});
            break;
        case Topology::MultiAgent:
            t = adversarial ? pick({"fix the {theme} flow mismatch across services",
                                    "update every {theme} handler for the new schema"})
                            : pick({"refactor the {theme} flow across services then test the batches",
                                    "implement the {theme} split across modules and test every stage"});
            break;
        case Topology::DeepResearch:
            t = adversarial ? pick({"why does {vague}", "something causes {vague}; narrow it down"})
                            : pick({"investigate why {vague}", "research what makes {vague}"});
            break;
    }
    t = fill(t, "{target}", target);
    t = fill(t, "{theme}", theme);
    t = fill(t, "{vague}", pick(vague_phrases()));
    return t;
}

}  // namespace detail

inline constexpr double kAdversarialFraction = 0.35;
inline constexpr double kTuneFraction = 0.4;

struct RoutingDataset {
    std::uint64_t seed = 0;
    std::vector<RoutingInstance> instances;
};

// Builds the labeled routing dataset: label mix 38/29/21/12 percent over
// FastPath / SubAgent / MultiAgent / DeepResearch, ~35% adversarial
// phrasings, and a stratified 40/60 tune/eval split per label.
inline RoutingDataset generate_routing_dataset(std::uint64_t seed = 7, std::uint64_t total = 250) {
    const std::vector<Topology> labels = {Topology::FastPath, Topology::SubAgent,
                                          Topology::MultiAgent, Topology::DeepResearch};
    auto counts = apportion(total, {0.38, 0.29, 0.21, 0.12});

    RoutingDataset ds;
    ds.seed = seed;
    Rng master(seed);

    for (std::size_t li = 0; li < labels.size(); ++li) {
        const Topology label = labels[li];
        const std::uint64_t n = counts[li];
        const std::uint64_t tune_n = apportion(n, {kTuneFraction, 1.0 - kTuneFraction})[0];

        std::vector<std::uint64_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        master.shuffle(order);
        std::vector<bool> is_tune(n, false);
        for (std::uint64_t j = 0; j < tune_n; ++j) is_tune[order[j]] = true;

        for (std::uint64_t j = 0; j < n; ++j) {
            RoutingInstance inst;
            inst.repo_seed = master.next_u64();
            Rng rng(inst.repo_seed);
            inst.oracle = label;
            inst.adversarial = rng.unit() < kAdversarialFraction;
            inst.split = is_tune[j] ? "tune" : "eval";
            inst.theme = detail::themes()[rng.below(detail::themes().size())];
            if (label != Topology::DeepResearch) {
                std::string verb = detail::verbs()[rng.below(detail::verbs().size())];
                std::string noun = detail::nouns()[rng.below(detail::nouns().size())];
                if (label == Topology::MultiAgent) verb = "rebalance";
                inst.target_name = verb + "_" + noun + "_" + inst.theme;
            }
            inst.task = detail::make_task(label, inst.adversarial, rng, inst.target_name, inst.theme);
            ds.instances.push_back(std::move(inst));
        }
    }

    // Deterministic interleave, then stable ids by final position.
    master.shuffle(ds.instances);
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
        ds.instances[i].id = "rt-" + detail::pad3(i);
    }
    return ds;
}

// Writes the repository for one dataset row and returns its plan metadata.
inline RepoPlan materialize_instance_repo(const RoutingInstance& inst,
                                          const std::filesystem::path& root) {
    return materialize_routing_repo(root, inst.oracle, inst.repo_seed, inst.task,
                                    inst.target_name, inst.theme);
}

inline json to_json(const RoutingInstance& inst) {
    return {{"id", inst.id},
            {"task", inst.task},
            {"repo",
             {{"seed", inst.repo_seed},
              {"files", inst.plan.files},
              {"cross_edges", inst.plan.cross_edges},
              {"depth", inst.plan.depth}}},
            {"oracle", to_string(inst.oracle)},
            {"split", inst.split},
            {"adversarial", inst.adversarial},
            {"target", inst.target_name},
            {"theme", inst.theme}};
}

// JSONL, one instance per line. Plans must be filled in (materialize first
// or call finalize_plans) so the repo descriptor carries real shape numbers.
inline void write_dataset_jsonl(const RoutingDataset& ds, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    for (const auto& inst : ds.instances) out << to_json(inst).dump() << "\n";
}

inline RoutingDataset load_dataset_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    RoutingDataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::strip(line).empty()) continue;
        json j = json::parse(line);
        RoutingInstance inst;
        inst.id = j.at("id").get<std::string>();
        inst.task = j.at("task").get<std::string>();
        inst.repo_seed = j.at("repo").at("seed").get<std::uint64_t>();
        inst.plan.files = j.at("repo").at("files").get<std::uint32_t>();
        inst.plan.cross_edges = j.at("repo").at("cross_edges").get<std::uint32_t>();
        inst.plan.depth = j.at("repo").at("depth").get<std::uint32_t>();
        inst.oracle = topology_from_string(j.at("oracle").get<std::string>());
        inst.split = j.at("split").get<std::string>();
        inst.adversarial = j.value("adversarial", false);
        inst.target_name = j.value("target", std::string{});
        inst.theme = j.value("theme", std::string{});
        inst.plan.target_name = inst.target_name;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

// Fills every instance's plan metadata by materializing each repository into
// a scratch directory once.
inline void finalize_plans(RoutingDataset& ds) {
    for (auto& inst : ds.instances) {
        TempDir tmp("rgao-plan");
        inst.plan = materialize_instance_repo(inst, tmp.path());
    }
}

}  // namespace rgao
