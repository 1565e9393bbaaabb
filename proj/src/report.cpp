#include "vitlab/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vitlab/errors.hpp"
#include "vitlab/kernels.hpp"

namespace fs = std::filesystem;

namespace vitlab {

const char* kResultsCsvHeader =
    "run_id,model,strategy,noise_rate,round,labeled_fraction,top1,brier,seconds,epochs,seed";

namespace {

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& msg) {
    throw FormatError(path + ":" + std::to_string(line_no) + ": " + msg);
}

bool parse_bool(const std::string& v, const std::string& path, int line_no) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    parse_fail(path, line_no, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

GridSpec parse_grid_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PathError("cannot open grid file: " + path);
    GridSpec spec;
    spec.dal.train.batch_size = 64;  // desk-scale default

    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(path, line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            const std::set<std::string> known = {"grid",       "dataset", "dal",  "models",
                                                "strategies", "noise_rates", "seeds"};
            if (!known.count(section)) parse_fail(path, line_no, "unknown section [" + section + "]");
            continue;
        }
        if (section.empty()) parse_fail(path, line_no, "entry before any [section]");

        if (section == "models") {
            spec.model_ids.push_back(line);
            continue;
        }
        if (section == "strategies") {
            spec.strategies.push_back(line);
            continue;
        }
        if (section == "noise_rates") {
            try {
                spec.noise_rates.push_back(std::stod(line));
            } catch (const std::exception&) {
                parse_fail(path, line_no, "bad noise rate '" + line + "'");
            }
            continue;
        }
        if (section == "seeds") {
            try {
                spec.seeds.push_back(std::stoull(line));
            } catch (const std::exception&) {
                parse_fail(path, line_no, "bad seed '" + line + "'");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) parse_fail(path, line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (section == "grid") {
                if (key == "name") spec.name = value;
                else if (key == "output_dir") spec.output_dir = value;
                else if (key == "workers") spec.workers = std::stoi(value);
                else parse_fail(path, line_no, "unknown [grid] key '" + key + "'");
            } else if (section == "dataset") {
                if (key == "kind") spec.dataset_kind = value;
                else if (key == "classes") spec.synth.num_classes = std::stoi(value);
                else if (key == "train_per_class") spec.synth_train_per_class = std::stoll(value);
                else if (key == "test_per_class") spec.synth_test_per_class = std::stoll(value);
                else if (key == "side") spec.synth.side = std::stoll(value);
                else if (key == "sigma") spec.synth.sigma = std::stod(value);
                else if (key == "seed") spec.synth.seed = std::stoull(value);
                else if (key == "train_files") spec.cifar_train_files = split(value, ',');
                else if (key == "test_files") spec.cifar_test_files = split(value, ',');
                else parse_fail(path, line_no, "unknown [dataset] key '" + key + "'");
            } else if (section == "dal") {
                if (key == "seed_size") spec.dal.seed_size = std::stoll(value);
                else if (key == "round_budget") spec.dal.round_budget = std::stoll(value);
                else if (key == "rounds") spec.dal.rounds = std::stoi(value);
                else if (key == "batch_size") spec.dal.train.batch_size = std::stoi(value);
                else if (key == "max_epochs") spec.dal.train.max_epochs = std::stoi(value);
                else if (key == "patience") spec.dal.train.patience = std::stoi(value);
                else if (key == "lr") spec.dal.train.lr = std::stod(value);
                else if (key == "val_fraction") spec.dal.train.val_fraction = std::stod(value);
                else if (key == "augment") spec.dal.train.augment = parse_bool(value, path, line_no);
                else if (key == "label_smoothing") spec.dal.gci.smoothing = std::stod(value);
                else if (key == "entropy_weight") spec.dal.gci.entropy_weight = std::stod(value);
                else if (key == "distance_weight") spec.dal.gci.distance_weight = std::stod(value);
                else if (key == "distance_target") {
                    if (value == "predicted") spec.dal.gci.target = DistanceTarget::PredictedClass;
                    else if (value == "nearest") spec.dal.gci.target = DistanceTarget::NearestCentroid;
                    else parse_fail(path, line_no, "distance_target must be predicted or nearest");
                } else if (key == "dropout") spec.dal.model.dropout = std::stod(value);
                else if (key == "reinit_each_round") spec.dal.reinit_each_round = parse_bool(value, path, line_no);
                else if (key == "save_checkpoints") spec.dal.save_round_checkpoints = parse_bool(value, path, line_no);
                else parse_fail(path, line_no, "unknown [dal] key '" + key + "'");
            }
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception& e) {
            parse_fail(path, line_no, "bad value '" + value + "' for key '" + key + "'");
        }
    }
    return spec;
}

namespace {

std::pair<ImageDataset, ImageDataset> build_datasets(const GridSpec& spec) {
    if (spec.dataset_kind == "synth") {
        SynthConfig train_cfg = spec.synth;
        train_cfg.samples_per_class = spec.synth_train_per_class;
        train_cfg.stream = 0;
        SynthConfig test_cfg = spec.synth;
        test_cfg.samples_per_class = spec.synth_test_per_class;
        test_cfg.stream = 1;
        return {synth_blobs(train_cfg), synth_blobs(test_cfg)};
    }
    const CifarVariant variant =
        spec.dataset_kind == "cifar100" ? CifarVariant::Cifar100 : CifarVariant::Cifar10;
    return {load_cifar_binary(spec.cifar_train_files, variant),
            load_cifar_binary(spec.cifar_test_files, variant)};
}

}  // namespace

void validate_grid(const GridSpec& spec) {
    if (spec.model_ids.empty() || spec.strategies.empty() || spec.noise_rates.empty() || spec.seeds.empty())
        throw InputError("grid axes must all be non-empty");
    if (spec.dataset_kind != "synth" && spec.dataset_kind != "cifar10" && spec.dataset_kind != "cifar100")
        throw InputError("dataset kind must be synth, cifar10 or cifar100");

    int64_t side = 32, classes = 10, train_size = -1;
    if (spec.dataset_kind == "synth") {
        SynthConfig c = spec.synth;
        c.samples_per_class = spec.synth_train_per_class;
        c.validate();
        side = c.side;
        classes = c.num_classes;
        train_size = c.num_classes * spec.synth_train_per_class;
    } else {
        if (spec.cifar_train_files.empty() || spec.cifar_test_files.empty())
            throw InputError("cifar datasets need train_files and test_files");
        for (const auto& p : spec.cifar_train_files)
            if (!fs::exists(p)) throw PathError("dataset file not found: " + p);
        for (const auto& p : spec.cifar_test_files)
            if (!fs::exists(p)) throw PathError("dataset file not found: " + p);
        classes = spec.dataset_kind == "cifar100" ? 100 : 10;
    }

    std::set<std::string> run_ids;
    for (const auto& id : spec.model_ids) {
        DalConfig cfg = spec.dal;
        cfg.model = ViTConfig::from_id(id, side, classes);
        for (const auto& s : spec.strategies) {
            cfg.strategy = strategy_from_string(s);
            for (double rate : spec.noise_rates) {
                cfg.noise_rate = rate;
                for (uint64_t seed : spec.seeds) {
                    cfg.master_seed = seed;
                    if (train_size > 0) cfg.validate(train_size);
                    if (!run_ids.insert(cell_run_id(id, s, rate, seed)).second)
                        throw InputError("duplicate grid cell " + cell_run_id(id, s, rate, seed));
                }
            }
        }
    }
}

std::string cell_run_id(const std::string& model_id, const std::string& strategy, double noise_rate,
                        uint64_t seed) {
    char noise[8];
    std::snprintf(noise, sizeof(noise), "n%03d", static_cast<int>(std::lround(noise_rate * 100.0)));
    return model_id + "-" + strategy + "-" + noise + "-s" + std::to_string(seed);
}

namespace {

// Canonical description of everything that affects results; stored as
// grid.lock so a results directory cannot silently resume under a
// different grid.
std::string canonical_grid_text(const GridSpec& s) {
    std::ostringstream os;
    os << "dataset=" << s.dataset_kind << "\n";
    if (s.dataset_kind == "synth") {
        os << "classes=" << s.synth.num_classes << " train_per_class=" << s.synth_train_per_class
           << " test_per_class=" << s.synth_test_per_class << " side=" << s.synth.side << " sigma="
           << fmt(s.synth.sigma, 9) << " seed=" << s.synth.seed << "\n";
    } else {
        os << "train_files=";
        for (const auto& p : s.cifar_train_files) os << p << ";";
        os << " test_files=";
        for (const auto& p : s.cifar_test_files) os << p << ";";
        os << "\n";
    }
    const DalConfig& d = s.dal;
    os << "seed_size=" << d.seed_size << " round_budget=" << d.round_budget << " rounds=" << d.rounds
       << " batch=" << d.train.batch_size << " max_epochs=" << d.train.max_epochs << " patience="
       << d.train.patience << " lr=" << fmt(d.train.lr, 9) << " val_fraction=" << fmt(d.train.val_fraction, 9)
       << " augment=" << d.train.augment << " smoothing=" << fmt(d.gci.smoothing, 9) << " ew="
       << fmt(d.gci.entropy_weight, 9) << " dw=" << fmt(d.gci.distance_weight, 9) << " target="
       << (d.gci.target == DistanceTarget::PredictedClass ? "predicted" : "nearest") << " dropout="
       << fmt(d.model.dropout, 9) << " reinit=" << d.reinit_each_round << "\n";
    os << "models=";
    for (const auto& m : s.model_ids) os << m << ";";
    os << "\nstrategies=";
    for (const auto& m : s.strategies) os << m << ";";
    os << "\nnoise_rates=";
    for (double n : s.noise_rates) os << fmt(n, 6) << ";";
    os << "\nseeds=";
    for (uint64_t x : s.seeds) os << x << ";";
    os << "\n";
    return os.str();
}

}  // namespace

std::string round_record_csv_row(const RoundRecord& r) {
    std::string row = r.run_id + "," + r.model_id + "," + r.strategy + "," + fmt(r.noise_rate, 2) + "," +
                      std::to_string(r.round) + "," + fmt(r.labeled_fraction, 6) + "," + fmt(r.top1, 6) + "," +
                      fmt(r.brier, 6) + "," + fmt(r.seconds, 3) + "," + std::to_string(r.epochs) + "," +
                      std::to_string(r.seed);
    return row;
}

std::vector<RoundRecord> read_results_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PathError("cannot open results csv: " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("empty results csv: " + path);
    if (trim(line) != kResultsCsvHeader) throw FormatError("unexpected csv header in " + path);
    std::vector<RoundRecord> out;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 11)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected 11 fields, got " +
                              std::to_string(fields.size()));
        RoundRecord r;
        try {
            r.run_id = fields[0];
            r.model_id = fields[1];
            r.strategy = fields[2];
            r.noise_rate = std::stod(fields[3]);
            r.round = std::stoi(fields[4]);
            r.labeled_fraction = std::stod(fields[5]);
            r.top1 = std::stod(fields[6]);
            r.brier = std::stod(fields[7]);
            r.seconds = std::stod(fields[8]);
            r.epochs = std::stoi(fields[9]);
            r.seed = std::stoull(fields[10]);
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid runner
// ---------------------------------------------------------------------------

std::string run_grid(const GridSpec& spec, const std::string& output_dir_override) {
    validate_grid(spec);
    std::string out_dir = !output_dir_override.empty() ? output_dir_override : spec.output_dir;
    if (out_dir.empty()) out_dir = "results/" + spec.name;
    fs::create_directories(out_dir + "/cells");

    const auto [train, test] = build_datasets(spec);

    struct Cell {
        std::string run_id;
        DalConfig cfg;
    };
    std::vector<Cell> cells;
    for (const auto& id : spec.model_ids)
        for (const auto& s : spec.strategies)
            for (double rate : spec.noise_rates)
                for (uint64_t seed : spec.seeds) {
                    DalConfig cfg = spec.dal;
                    cfg.model = ViTConfig::from_id(id, train.side, train.num_classes);
                    cfg.strategy = strategy_from_string(s);
                    cfg.noise_rate = rate;
                    cfg.master_seed = seed;
                    cfg.validate(train.size());
                    if (cfg.save_round_checkpoints) {
                        cfg.checkpoint_dir = out_dir + "/checkpoints/" + cell_run_id(id, s, rate, seed);
                        fs::create_directories(cfg.checkpoint_dir);
                    }
                    cells.push_back({cell_run_id(id, s, rate, seed), std::move(cfg)});
                }

    const std::string lock_path = out_dir + "/grid.lock";
    const std::string lock_text = canonical_grid_text(spec);
    if (fs::exists(lock_path)) {
        std::ifstream lf(lock_path);
        std::ostringstream existing;
        existing << lf.rdbuf();
        if (existing.str() != lock_text)
            throw InputError("results directory " + out_dir +
                             " was produced by a different grid; use a fresh output directory");
    } else {
        std::ofstream lf(lock_path, std::ios::trunc);
        lf << lock_text;
    }

    const std::string manifest_path = out_dir + "/manifest.txt";
    std::set<std::string> done;
    {
        std::ifstream mf(manifest_path);
        std::string line;
        while (std::getline(mf, line)) {
            line = trim(line);
            if (!line.empty()) done.insert(line);
        }
    }

    std::vector<int64_t> todo;
    for (size_t i = 0; i < cells.size(); ++i)
        if (!done.count(cells[i].run_id)) todo.push_back(static_cast<int64_t>(i));

    int workers = spec.workers;
    if (const char* env = std::getenv("VITLAB_WORKERS")) workers = std::atoi(env);
    workers = std::clamp<int>(workers, 1, std::max<size_t>(todo.size(), 1));

    const int prev_cap = kernels::thread_cap().load();
    if (workers > 1) kernels::set_thread_cap(std::max(1, omp_get_max_threads() / workers));

    std::atomic<int64_t> next{0};
    std::mutex manifest_mu;
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto work = [&]() {
        for (;;) {
            const int64_t slot = next.fetch_add(1);
            if (slot >= static_cast<int64_t>(todo.size())) return;
            const Cell& cell = cells[static_cast<size_t>(todo[static_cast<size_t>(slot)])];
            try {
                std::vector<RoundRecord> records = run_dal(train, test, cell.cfg);
                for (auto& r : records) r.run_id = cell.run_id;
                const std::string cell_path = out_dir + "/cells/" + cell.run_id + ".csv";
                {
                    std::ofstream cf(cell_path, std::ios::trunc);
                    for (const auto& r : records) cf << round_record_csv_row(r) << "\n";
                    cf.flush();
                    if (!cf) throw PathError("cannot write " + cell_path);
                }
                {
                    std::lock_guard<std::mutex> lock(manifest_mu);
                    std::ofstream mf(manifest_path, std::ios::app);
                    mf << cell.run_id << "\n";
                    mf.flush();
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    kernels::set_thread_cap(prev_cap);
    if (first_error) std::rethrow_exception(first_error);

    // Assemble results.csv and runlog.jsonl from the per-cell files in
    // run-id order; rerunning over a completed directory reproduces them.
    std::vector<std::string> ordered_ids;
    for (const auto& c : cells) ordered_ids.push_back(c.run_id);
    std::sort(ordered_ids.begin(), ordered_ids.end());

    std::ofstream rf(out_dir + "/results.csv", std::ios::trunc);
    rf << kResultsCsvHeader << "\n";
    for (const auto& id : ordered_ids) {
        std::ifstream cf(out_dir + "/cells/" + id + ".csv");
        if (!cf) throw PathError("missing cell result " + id + ".csv");
        rf << cf.rdbuf();
    }
    rf.close();

    const std::vector<RoundRecord> all = read_results_csv(out_dir + "/results.csv");
    std::ofstream jf(out_dir + "/runlog.jsonl", std::ios::trunc);
    for (const auto& r : all) {
        nlohmann::ordered_json j;
        j["run_id"] = r.run_id;
        j["model"] = r.model_id;
        j["strategy"] = r.strategy;
        j["noise_rate"] = r.noise_rate;
        j["round"] = r.round;
        j["labeled_fraction"] = r.labeled_fraction;
        j["top1"] = r.top1;
        j["brier"] = r.brier;
        j["seconds"] = r.seconds;
        j["epochs"] = r.epochs;
        j["seed"] = r.seed;
        jf << j.dump() << "\n";
    }
    return out_dir;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string render_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                         const std::vector<Series>& series) {
    const double W = 720, H = 440, ml = 70, mr = 170, mt = 50, mb = 55;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" << title << "</text>\n";
    svg << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        svg << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx) << "\" y2=\""
            << mt + ph + 5 << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fx, 2)
            << "</text>\n";
        svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\"" << py(fy)
            << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << ml - 9 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(fy, 3)
            << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel << "</text>\n";
    svg << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
        << mt + ph / 2 << ")\">" << ylabel << "</text>\n";
    for (size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[i].points) svg << fmt(px(x), 2) << "," << fmt(py(y), 2) << " ";
        svg << "\"/>\n";
        for (const auto& [x, y] : series[i].points)
            svg << "<circle cx=\"" << fmt(px(x), 2) << "\" cy=\"" << fmt(py(y), 2) << "\" r=\"3\" fill=\""
                << color << "\"/>\n";
        const double ly = mt + 16 + 18 * static_cast<double>(i);
        svg << "<line x1=\"" << W - mr + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - mr + 36 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << W - mr + 42 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[i].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw PathError("cannot write " + path);
    f << content;
}

template <class Getter>
void write_matrix_csv(const std::string& path, const std::string& row_title,
                      const std::vector<std::string>& rows, const std::vector<double>& noises, Getter get) {
    std::ostringstream os;
    os << row_title;
    for (double nr : noises) os << "," << fmt(nr, 2);
    os << "\n";
    for (const auto& r : rows) {
        os << r;
        for (double nr : noises) os << "," << fmt(get(r, nr), 6);
        os << "\n";
    }
    write_file(path, os.str());
}

}  // namespace

std::string emit_report(const std::string& results_dir, const std::string& out_dir) {
    const std::vector<RoundRecord> records = read_results_csv(results_dir + "/results.csv");
    if (records.empty()) throw FormatError("results csv has no records");
    const std::string out = out_dir.empty() ? results_dir + "/report" : out_dir;
    fs::create_directories(out);

    std::set<std::string> model_set, strategy_set;
    std::set<double> noise_set, proportion_set;
    for (const auto& r : records) {
        model_set.insert(r.model_id);
        strategy_set.insert(r.strategy);
        noise_set.insert(r.noise_rate);
        proportion_set.insert(r.labeled_fraction);
    }
    const std::vector<std::string> models(model_set.begin(), model_set.end());
    const std::vector<std::string> strategies(strategy_set.begin(), strategy_set.end());
    const std::vector<double> noises(noise_set.begin(), noise_set.end());
    const double final_proportion = *proportion_set.rbegin();

    // (a) model x noise matrices, averaged over strategies and proportions
    GridKeyOptions mn;
    mn.by_strategy = false;
    mn.by_proportion = false;
    const std::vector<GridCell> cells_mn = aggregate_grid(records, mn);
    write_matrix_csv(out + "/accuracy_matrix.csv", "model", models, noises, [&](const std::string& m, double nr) {
        return find_cell(cells_mn, m, nr, "*", -1.0).mean_top1;
    });
    write_matrix_csv(out + "/brier_matrix.csv", "model", models, noises, [&](const std::string& m, double nr) {
        return find_cell(cells_mn, m, nr, "*", -1.0).mean_brier;
    });

    // (b) strategy deltas vs random at the final labeled proportion,
    // averaged over models and seeds
    std::vector<RoundRecord> final_records;
    for (const auto& r : records)
        if (r.labeled_fraction == final_proportion) final_records.push_back(r);
    GridKeyOptions sn;
    sn.by_model = false;
    sn.by_proportion = false;
    const std::vector<GridCell> cells_sn = aggregate_grid(final_records, sn);
    const std::vector<DeltaCell> deltas = delta_vs_random(cells_sn);
    auto delta_of = [&](const std::string& strategy, double nr) -> const DeltaCell& {
        for (const auto& d : deltas)
            if (d.strategy == strategy && d.noise_rate == nr) return d;
        throw CoverageError("missing delta for " + strategy + " at noise " + std::to_string(nr));
    };
    write_matrix_csv(out + "/acc_delta_vs_random.csv", "strategy", strategies, noises,
                     [&](const std::string& s, double nr) { return delta_of(s, nr).accuracy_delta; });
    write_matrix_csv(out + "/brier_delta_vs_random.csv", "strategy", strategies, noises,
                     [&](const std::string& s, double nr) { return delta_of(s, nr).brier_delta; });

    // (c) per-strategy curves at the final proportion, one polyline per model
    GridKeyOptions full;
    full.by_proportion = false;
    const std::vector<GridCell> cells_full = aggregate_grid(final_records, full);
    for (const auto& s : strategies) {
        std::vector<Series> acc_series, brier_series;
        for (const auto& m : models) {
            Series sa{m, {}}, sb{m, {}};
            for (double nr : noises) {
                const GridCell& c = find_cell(cells_full, m, nr, s, -1.0);
                sa.points.emplace_back(nr, c.mean_top1);
                sb.points.emplace_back(nr, c.mean_brier);
            }
            acc_series.push_back(std::move(sa));
            brier_series.push_back(std::move(sb));
        }
        write_file(out + "/accuracy_" + s + ".svg",
                   render_chart("top-1 accuracy vs label noise (" + s + ")", "label noise rate",
                                "top-1 accuracy", acc_series));
        write_file(out + "/brier_" + s + ".svg",
                   render_chart("Brier score vs label noise (" + s + ")", "label noise rate", "Brier score",
                                brier_series));
    }

    // (d) training time vs labeled proportion, one polyline per model
    GridKeyOptions mp;
    mp.by_noise = false;
    mp.by_strategy = false;
    const std::vector<GridCell> cells_mp = aggregate_grid(records, mp);
    std::vector<Series> time_series;
    for (const auto& m : models) {
        Series s{m, {}};
        for (double p : proportion_set) {
            const GridCell& c = find_cell(cells_mp, m, -1.0, "*", p);
            s.points.emplace_back(p, c.mean_seconds);
        }
        time_series.push_back(std::move(s));
    }
    write_file(out + "/time_vs_labeled.svg",
               render_chart("training seconds vs labeled proportion", "labeled fraction",
                            "seconds per round", time_series));
    return out;
}

}  // namespace vitlab
