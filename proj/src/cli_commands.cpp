#include "neq/cli_commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "neq/harness.hpp"
#include "neq/io.hpp"

namespace neq {

namespace {

namespace fs = std::filesystem;

const std::set<std::string> kCommonKeys = {"channel", "modulation", "seed"};
const std::set<std::string> kTrainKeys = {
    "train.batch_size", "train.lr",          "train.symbols",     "train.valid_symbols",
    "train.test_symbols", "train.valid_every", "train.snr_db",    "train.stop_after_steps"};
const std::set<std::string> kNeqKeys = {"neq.T", "neq.D", "neq.N", "neq.checkpoint"};

std::set<std::string> merge_keys(std::initializer_list<std::set<std::string>> sets) {
    std::set<std::string> out;
    for (const auto& s : sets) out.insert(s.begin(), s.end());
    return out;
}

Channel load_channel_checked(const std::string& path) {
    Channel ch = load_channel(path);
    for (const std::string& w : ch.validate()) std::cerr << "neq: " << path << ": " << w << "\n";
    return ch;
}

Modulation modulation_from(const RunConfig& cfg) {
    const std::string name = cfg.get_str("modulation", "pam4");
    if (name == "pam2") return Modulation::pam2();
    if (name == "pam4") return Modulation::pam4();
    throw std::invalid_argument("modulation must be pam2 or pam4, got '" + name + "'");
}

TrainConfig train_config_from(const RunConfig& cfg, std::uint64_t seed) {
    TrainConfig tc;
    tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", tc.batch_size));
    tc.learning_rate = cfg.get_real("train.lr", tc.learning_rate);
    tc.train_symbols = cfg.get_u64("train.symbols", tc.train_symbols);
    tc.valid_symbols = cfg.get_u64("train.valid_symbols", tc.valid_symbols);
    tc.test_symbols = cfg.get_u64("train.test_symbols", tc.test_symbols);
    tc.valid_every = static_cast<int>(cfg.get_int("train.valid_every", tc.valid_every));
    tc.stop_after_steps = cfg.get_u64("train.stop_after_steps", 0);
    tc.seed = seed;
    return tc;
}

NeuralEqConfig neq_config_from(const RunConfig& cfg, int mod_order) {
    NeuralEqConfig nc;
    nc.T = static_cast<int>(cfg.get_int("neq.T", nc.T));
    nc.D = static_cast<int>(cfg.get_int("neq.D", nc.D));
    nc.N = static_cast<int>(cfg.get_int("neq.N", nc.N));
    nc.mod_order = mod_order;
    nc.validate();
    return nc;
}

void write_manifest(const std::string& out_dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& artifacts,
                    const std::vector<std::string>& notes = {}) {
    std::map<std::string, std::string> entries;
    entries["command"] = command;
    for (const auto& [k, v] : cfg.entries()) entries["config." + k] = v;
    for (const std::string& name : artifacts) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "0x%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(out_dir + "/" + name)));
        entries["artifact." + name + ".fnv1a64"] = buf;
    }
    for (std::size_t i = 0; i < notes.size(); ++i)
        entries["note." + std::to_string(i)] = notes[i];
    atomic_write_file(out_dir + "/manifest.txt", manifest_text(entries));
}

void atomic_save_checkpoint(const std::string& path, const NeuralEqModel& model) {
    const std::string tmp = path + ".tmp";
    save_checkpoint(tmp, model);
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " into place");
}

// ---- resumable trainer state ------------------------------------------------

constexpr char kStateMagic[4] = {'N', 'E', 'Q', 'S'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t take_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
double take_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

std::vector<double> take_doubles(std::istream& in) {
    std::vector<double> v(take_u64(in));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    return v;
}

void put_mask(std::ostream& out, const std::vector<std::uint8_t>& mask) {
    put_u64(out, mask.size());
    std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
}

std::vector<std::uint8_t> take_mask(std::istream& in) {
    std::vector<std::uint8_t> mask(take_u64(in));
    std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return mask;
}

void save_trainer_state(const std::string& path, std::uint64_t config_hash,
                        const NeuralEqModel& model, const TrainerState& st) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(kStateMagic, 4);
        put_u64(out, 1);  // version
        put_u64(out, config_hash);
        put_u64(out, st.next_step);
        put_u64(out, st.adam.t);
        put_f64(out, st.best_valid_ber);
        out.put(st.have_best ? 1 : 0);
        put_doubles(out, model.store().values);
        put_mask(out, model.store().mask);
        put_doubles(out, st.adam.m);
        put_doubles(out, st.adam.v);
        put_doubles(out, st.best_values);
        put_mask(out, st.best_mask);
        put_u64(out, st.trace.size());
        for (const TraceRow& r : st.trace) {
            put_u64(out, r.step);
            put_f64(out, r.loss);
            put_f64(out, r.valid_ber);
            out.put(r.has_valid ? 1 : 0);
        }
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " into place");
}

void load_trainer_state(const std::string& path, std::uint64_t config_hash, NeuralEqModel& model,
                        TrainerState& st) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trainer state: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kStateMagic, 4) != 0)
        throw std::runtime_error(path + ": not a trainer state file");
    if (take_u64(in) != 1) throw std::runtime_error(path + ": unsupported state version");
    if (take_u64(in) != config_hash)
        throw std::runtime_error(path + ": state was written under a different configuration");
    st.next_step = take_u64(in);
    st.adam.t = take_u64(in);
    st.best_valid_ber = take_f64(in);
    st.have_best = in.get() == 1;
    model.store().values = take_doubles(in);
    model.store().mask = take_mask(in);
    st.adam.m = take_doubles(in);
    st.adam.v = take_doubles(in);
    st.best_values = take_doubles(in);
    st.best_mask = take_mask(in);
    st.trace.resize(take_u64(in));
    for (TraceRow& r : st.trace) {
        r.step = take_u64(in);
        r.loss = take_f64(in);
        r.valid_ber = take_f64(in);
        r.has_valid = in.get() == 1;
    }
    if (!in) throw std::runtime_error(path + ": truncated trainer state");
    if (model.store().values.size() != model.store().total())
        throw std::runtime_error(path + ": state does not match the network shape");
}

std::vector<EqualizerSpec> roster_from(const RunConfig& cfg, const Modulation& mod) {
    std::vector<EqualizerSpec> roster;
    for (const std::string& name : cfg.get_str_list("roster")) {
        EqualizerSpec eq;
        eq.id = name;
        if (name == "slicer") {
            eq.kind = EqKind::Slicer;
        } else if (name == "ffe") {
            eq.kind = EqKind::Ffe;
            eq.ffe_taps = static_cast<int>(cfg.get_int("ffe.taps", 8));
            eq.ffe_cursor = static_cast<int>(cfg.get_int("ffe.cursor", -1));
        } else if (name == "dfe") {
            eq.kind = EqKind::Dfe;
            eq.dfe_ff = static_cast<int>(cfg.get_int("dfe.ff_taps", 8));
            eq.dfe_fb = static_cast<int>(cfg.get_int("dfe.fb_taps", 3));
        } else if (name == "fb") {
            eq.kind = EqKind::Fb;
            eq.fb_block = cfg.get_u64("fb.block", 4096);
            eq.fb_overlap = cfg.get_u64("fb.overlap", 0);
            eq.fb_state_cap = cfg.get_u64("fb.state_cap", kDefaultStateCap);
        } else if (name == "neuraleq") {
            eq.kind = EqKind::NeuralEq;
            eq.neq = neq_config_from(cfg, mod.order);
            eq.checkpoint = cfg.get_str("neq.checkpoint", "");
        } else if (name == "mlp") {
            eq.kind = EqKind::Mlp;
            eq.mlp.hidden1 = static_cast<int>(cfg.get_int("mlp.h1", 216));
            eq.mlp.hidden2 = static_cast<int>(cfg.get_int("mlp.h2", 376));
            eq.mlp.T = static_cast<int>(cfg.get_int("neq.T", 12));
            eq.mlp.mod_order = mod.order;
            eq.neq.D = static_cast<int>(cfg.get_int("neq.D", 4));
        } else {
            throw std::invalid_argument("unknown roster entry: '" + name + "'");
        }
        roster.push_back(std::move(eq));
    }
    return roster;
}

int fail(const std::string& command, const std::exception& e) {
    std::cerr << "neq " << command << ": " << e.what() << "\n";
    return 1;
}

}  // namespace

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
    try {
        cfg.require_known(merge_keys({kCommonKeys, kTrainKeys, kNeqKeys,
                                      {"snr_db", "symbols_per_point", "roster", "ffe.taps",
                                       "ffe.cursor", "dfe.ff_taps", "dfe.fb_taps", "fb.block",
                                       "fb.overlap", "fb.state_cap", "mlp.h1", "mlp.h2"}}));
        SweepSpec spec;
        spec.channel = load_channel_checked(cfg.require_str("channel"));
        spec.mod = modulation_from(cfg);
        spec.snr_db = cfg.get_real_list("snr_db");
        spec.symbols_per_point = cfg.get_u64("symbols_per_point", 1'000'000);
        spec.seed = cfg.get_u64("seed", 1);
        spec.roster = roster_from(cfg, spec.mod);
        spec.train = train_config_from(cfg, spec.seed);
        if (cfg.has("train.snr_db")) {
            spec.train.snr_db = cfg.get_real("train.snr_db", 0.0);
            spec.train_snr_set = true;
        }

        fs::create_directories(out_dir);
        const SweepResult result = run_sweep(spec);
        for (const std::string& w : result.warnings) std::cerr << "neq sweep: warning: " << w << "\n";

        atomic_write_file(out_dir + "/ber.csv", ber_csv(result.points));
        std::vector<SvgSeries> series;
        for (const EqualizerSpec& eq : spec.roster) {
            SvgSeries s;
            s.name = eq.id;
            for (const BerPoint& p : result.points)
                if (p.equalizer_id == eq.id) s.points.emplace_back(p.snr_db, p.ber);
            if (!s.points.empty()) series.push_back(std::move(s));
        }
        atomic_write_file(out_dir + "/sweep.svg",
                          svg_line_chart("BER vs SNR", "SNR (dB)", "BER", series));
        std::vector<std::string> artifacts = {"ber.csv", "sweep.svg"};
        if (!result.train_trace.empty()) {
            atomic_write_file(out_dir + "/train_trace.csv", trace_csv(result.train_trace));
            artifacts.push_back("train_trace.csv");
        }
        write_manifest(out_dir, "sweep", cfg, artifacts, result.warnings);
        return 0;
    } catch (const std::exception& e) {
        return fail("sweep", e);
    }
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    try {
        cfg.require_known(merge_keys({kCommonKeys, kTrainKeys, kNeqKeys, {"resume"}}));
        const Channel ch = load_channel_checked(cfg.require_str("channel"));
        const Modulation mod = modulation_from(cfg);
        const std::uint64_t seed = cfg.get_u64("seed", 1);
        const NeuralEqConfig nc = neq_config_from(cfg, mod.order);
        TrainConfig tc = train_config_from(cfg, seed);
        tc.snr_db = cfg.get_real("train.snr_db", tc.snr_db);
        if (!cfg.has("train.snr_db"))
            throw std::invalid_argument("cmd_train requires train.snr_db");

        fs::create_directories(out_dir);
        const std::string state_path = out_dir + "/train_state.bin";
        const std::string ckpt_path = out_dir + "/checkpoint.neq1";

        // Per-invocation knobs must not change the state identity.
        RunConfig hashed = cfg;
        hashed.set("resume", "");
        hashed.set("train.stop_after_steps", "");
        const std::uint64_t config_hash = fnv1a64(hashed.resolved_text());

        NeuralEqModel model(nc);
        TrainerState st;
        if (cfg.get_bool("resume", false)) load_trainer_state(state_path, config_hash, model, st);

        const TrainResult result = train(model, tc, ch, mod, &st);
        if (result.diverged) std::cerr << "neq train: loss diverged; best checkpoint kept\n";

        // checkpoint.neq1 always carries the best-validation parameters.
        if (result.complete) {
            atomic_save_checkpoint(ckpt_path, model);
        } else {
            NeuralEqModel best(nc);
            best.store().values = st.best_values;
            best.store().mask = st.best_mask;
            atomic_save_checkpoint(ckpt_path, best);
        }
        save_trainer_state(state_path, config_hash, model, st);
        atomic_write_file(out_dir + "/loss_trace.csv", trace_csv(st.trace));
        write_manifest(out_dir, "train", cfg,
                       {"checkpoint.neq1", "train_state.bin", "loss_trace.csv"},
                       {"best_valid_ber = " + format_real(result.valid_ber),
                        result.complete ? "complete" : "paused"});
        return 0;
    } catch (const std::exception& e) {
        return fail("train", e);
    }
}

int cmd_prune(const RunConfig& cfg, const std::string& out_dir) {
    try {
        cfg.require_known(merge_keys({kCommonKeys, kTrainKeys, kNeqKeys,
                                      {"prune.target_sparsity", "prune.finetune_batches",
                                       "prune.schedule", "prune.fraction"}}));
        const Channel ch = load_channel_checked(cfg.require_str("channel"));
        const Modulation mod = modulation_from(cfg);
        const std::uint64_t seed = cfg.get_u64("seed", 1);
        TrainConfig tc = train_config_from(cfg, seed);
        tc.snr_db = cfg.get_real("train.snr_db", tc.snr_db);
        if (!cfg.has("train.snr_db"))
            throw std::invalid_argument("cmd_prune requires train.snr_db");
        const std::string ckpt = cfg.require_str("neq.checkpoint");
        const double target = cfg.get_real("prune.target_sparsity", 0.5);
        const int finetune = static_cast<int>(cfg.get_int("prune.finetune_batches", 500));
        const double fraction = cfg.get_real("prune.fraction", 0.10);
        const std::string sched_name = cfg.get_str("prune.schedule", "geometric");
        PruneSchedule schedule;
        if (sched_name == "geometric")
            schedule = PruneSchedule::Geometric;
        else if (sched_name == "linear")
            schedule = PruneSchedule::Linear;
        else
            throw std::invalid_argument("prune.schedule must be geometric or linear");

        fs::create_directories(out_dir);
        NeuralEqModel model = load_checkpoint(ckpt);
        const PruneReport report =
            iterative_prune(model, tc, ch, mod, target, finetune, schedule, fraction);

        atomic_write_file(out_dir + "/prune_layers.csv", prune_layers_csv(report));
        atomic_write_file(out_dir + "/prune_ber.csv", prune_ber_csv(report));
        atomic_save_checkpoint(out_dir + "/pruned.neq1", model);
        write_manifest(out_dir, "prune", cfg, {"prune_layers.csv", "prune_ber.csv", "pruned.neq1"},
                       {"baseline_ber = " + format_real(report.baseline_ber),
                        "final_sparsity = " + format_real(model.store().global_sparsity())});
        return 0;
    } catch (const std::exception& e) {
        return fail("prune", e);
    }
}

int cmd_robustness(const RunConfig& cfg, const std::string& out_dir) {
    try {
        cfg.require_known(merge_keys({kCommonKeys, kTrainKeys, kNeqKeys,
                                      {"snr_db", "p_values", "trials", "symbols_per_trial",
                                       "roster", "ffe.taps", "ffe.cursor", "dfe.ff_taps",
                                       "dfe.fb_taps", "fb.block", "fb.overlap", "fb.state_cap",
                                       "mlp.h1", "mlp.h2"}}));
        SkewSpec spec;
        spec.base = load_channel_checked(cfg.require_str("channel"));
        spec.mod = modulation_from(cfg);
        spec.snr_db = cfg.get_real("snr_db", 12.0);
        spec.p_values = cfg.get_real_list("p_values");
        if (spec.p_values.empty()) spec.p_values = {0.0, 0.01, 0.02};
        spec.trials = static_cast<int>(cfg.get_int("trials", 20));
        spec.symbols_per_trial = cfg.get_u64("symbols_per_trial", 400'000);
        spec.seed = cfg.get_u64("seed", 1);
        spec.train = train_config_from(cfg, spec.seed);
        const std::vector<EqualizerSpec> roster = roster_from(cfg, spec.mod);
        if (roster.empty()) throw std::invalid_argument("robustness requires a roster");

        fs::create_directories(out_dir);
        const std::vector<RobustnessRow> rows = robustness_experiment(spec, roster);
        std::string csv = "p,equalizer,mean_ber,std_ber\n";
        for (const RobustnessRow& r : rows)
            csv += format_real(r.p) + "," + r.equalizer_id + "," + format_real(r.mean_ber) + "," +
                   format_real(r.std_ber) + "\n";
        atomic_write_file(out_dir + "/robustness.csv", csv);
        write_manifest(out_dir, "robustness", cfg, {"robustness.csv"});
        return 0;
    } catch (const std::exception& e) {
        return fail("robustness", e);
    }
}

int cmd_gridsearch(const RunConfig& cfg, const std::string& out_dir) {
    try {
        cfg.require_known(merge_keys(
            {kCommonKeys, kTrainKeys, {"snr_db", "candidates", "neq.T", "neq.D"}}));
        const Channel ch = load_channel_checked(cfg.require_str("channel"));
        const Modulation mod = modulation_from(cfg);
        const std::uint64_t seed = cfg.get_u64("seed", 1);
        const double snr_db = cfg.get_real("snr_db", 12.0);
        TrainConfig tc = train_config_from(cfg, seed);
        std::vector<int> candidates;
        for (long long v : cfg.get_int_list("candidates")) candidates.push_back(static_cast<int>(v));
        const int T = static_cast<int>(cfg.get_int("neq.T", 12));
        const int D = static_cast<int>(cfg.get_int("neq.D", 4));

        fs::create_directories(out_dir);
        const GridResult result = grid_search_width(ch, mod, snr_db, candidates, tc, T, D);
        std::string csv = "n,valid_ber,param_count,failed\n";
        for (const GridRow& r : result.rows)
            csv += std::to_string(r.n) + "," + format_real(r.valid_ber) + "," +
                   std::to_string(r.params) + "," + (r.failed ? "1" : "0") + "\n";
        atomic_write_file(out_dir + "/gridsearch.csv", csv);
        write_manifest(out_dir, "gridsearch", cfg, {"gridsearch.csv"},
                       {"best_n = " + std::to_string(result.best_n)});
        return 0;
    } catch (const std::exception& e) {
        return fail("gridsearch", e);
    }
}

int cmd_gen_channel(double loss_db, int taps, int pre_cursors, const std::string& out_path) {
    try {
        if (!(loss_db > 0.0)) throw std::invalid_argument("gen-channel: loss must be positive dB");
        if (taps < 2) throw std::invalid_argument("gen-channel: need at least 2 taps");
        if (pre_cursors < 0 || pre_cursors >= taps)
            throw std::invalid_argument("gen-channel: pre-cursor count out of range");

        const auto profile = [&](double decay) {
            Channel ch;
            ch.pre_cursors = pre_cursors;
            ch.taps.resize(static_cast<std::size_t>(taps));
            for (int k = 0; k < taps; ++k)
                ch.taps[static_cast<std::size_t>(k)] = std::pow(decay, std::abs(k - pre_cursors));
            return ch;
        };
        const auto loss_of = [&](double decay) {
            const Channel ch = profile(decay);
            double dc = 0.0, nyq = 0.0;
            for (int k = 0; k < taps; ++k) {
                dc += ch.taps[static_cast<std::size_t>(k)];
                nyq += (k % 2 == 0 ? 1.0 : -1.0) * ch.taps[static_cast<std::size_t>(k)];
            }
            if (nyq == 0.0) return 1e9;
            return -20.0 * std::log10(std::abs(nyq) / dc);
        };

        // loss grows with the decay factor; bracket on a grid, then bisect.
        double lo = 1e-9, hi = -1.0;
        for (int i = 1; i <= 4096; ++i) {
            const double r = static_cast<double>(i) / 4097.0;
            if (loss_of(r) >= loss_db) {
                hi = r;
                break;
            }
            lo = r;
        }
        if (hi < 0.0)
            throw std::runtime_error("gen-channel: requested loss is not reachable with " +
                                     std::to_string(taps) + " taps");
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (loss_of(mid) < loss_db)
                lo = mid;
            else
                hi = mid;
        }
        const double decay = 0.5 * (lo + hi);
        const double achieved = loss_of(decay);
        if (std::abs(achieved - loss_db) > 0.1)
            throw std::runtime_error("gen-channel: profile missed the target by " +
                                     format_real(std::abs(achieved - loss_db)) + " dB");

        const Channel ch = profile(decay);
        std::ostringstream body;
        write_channel(body, ch);
        atomic_write_file(out_path, body.str());
        return 0;
    } catch (const std::exception& e) {
        return fail("gen-channel", e);
    }
}

}  // namespace neq
