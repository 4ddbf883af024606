// zupt: command-line front end for simulation, labelling, training,
// estimation, retargeting and evaluation.
//
// Exit codes: 0 ok, 1 other error, 2 malformed input (CSV/JSON/arguments),
// 3 numerical divergence.

#include "zupt/config.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace zupt;
using nlohmann::json;

namespace {

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail(path + ": cannot open for writing");
    out << j.dump(2) << '\n';
}

/// Accepts either a trial directory or a bare IMU CSV.
ImuSequence load_imu(const std::string& path) {
    if (fs::is_directory(path)) return read_trial(path).imu;
    return csv::read_imu(path);
}

/// Labels for training: labels.csv written by `label` wins over gt_zv.csv.
TrialRecord load_labelled_trial(const std::string& dir) {
    TrialRecord trial = read_trial(dir);
    const fs::path labels = fs::path(dir) / "labels.csv";
    if (fs::exists(labels)) {
        const auto l = csv::read_labels(labels.string());
        trial.gt_zv = resample_flags(l.t, l.zv, trial.imu.times());
    }
    if (!trial.gt_zv) fail(dir + ": trial has no zero-velocity labels (labels.csv or gt_zv.csv)");
    return trial;
}

/// Positions from either a `t,px,py,pz` file or a trajectory CSV.
std::vector<TimedPosition> load_positions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::parse, path + ": cannot open file");
    std::string first;
    std::getline(in, first);
    if (first.rfind("t,px,py,pz,vx", 0) == 0) return read_trajectory(path).positions();
    return csv::read_positions(path);
}

config::PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    return config::load_pipeline_config(path);
}

void write_motion_trace(const std::string& path, const ImuSequence& seq, const SvmModel& model, int cadence) {
    auto out = csv::open_out(path);
    out << "t,motion\n";
    for (std::size_t e = kMotionWindowLength; e <= seq.size(); e += static_cast<std::size_t>(cadence)) {
        const auto m = classify_motion(model, make_motion_window(seq, e - kMotionWindowLength));
        out << csv::format_double(seq[e - 1].t) << ',' << to_string(m) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-velocity-aided foot-mounted INS toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic gait trial");
    std::string sim_profile, sim_out;
    double sim_duration = 60.0;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--profile", sim_profile, "Gait profile JSON")->required();
    sim->add_option("--duration", sim_duration, "Duration in seconds")->required();
    sim->add_option("--out", sim_out, "Output trial directory")->required();
    sim->add_option("--seed", sim_seed, "Override the profile's noise seed");

    // label
    auto* lab = app.add_subcommand("label", "Generate zero-velocity labels by per-detector threshold search");
    std::string lab_trial, lab_out, lab_config, lab_detectors = "shoe,ared,speed";
    lab->add_option("--trial", lab_trial, "Trial directory with gt_positions.csv")->required();
    lab->add_option("--detectors", lab_detectors, "Comma-separated subset of shoe,ared,speed");
    lab->add_option("--out", lab_out, "Output directory")->required();
    lab->add_option("--config", lab_config, "Pipeline config JSON");

    // train-svm
    auto* tsvm = app.add_subcommand("train-svm", "Train the motion classifier");
    std::vector<std::string> tsvm_trials;
    std::string tsvm_out;
    int tsvm_windows = 2000;
    SvmConfig tsvm_cfg;
    std::uint64_t tsvm_seed = 0;
    bool tsvm_no_rotate = false;
    tsvm->add_option("--trials", tsvm_trials, "Trial directories with a motion label")->required();
    tsvm->add_option("--out", tsvm_out, "Model JSON")->required();
    tsvm->add_option("--windows-per-trial", tsvm_windows, "Windows drawn per trial");
    tsvm->add_option("--gamma", tsvm_cfg.gamma, "RBF kernel coefficient");
    tsvm->add_option("--c", tsvm_cfg.c, "Soft-margin penalty");
    tsvm->add_option("--seed", tsvm_seed, "Window sampling seed");
    tsvm->add_flag("--no-rotate", tsvm_no_rotate, "Disable random rotation of training windows");

    // classify
    auto* cls = app.add_subcommand("classify", "Classify motion over a trial with an SVM model");
    std::string cls_model, cls_in, cls_out;
    int cls_cadence = 50;
    cls->add_option("--model", cls_model, "SVM model JSON")->required();
    cls->add_option("--trial", cls_in, "Trial directory or IMU CSV")->required();
    cls->add_option("--out", cls_out, "Output CSV t,motion")->required();
    cls->add_option("--cadence", cls_cadence, "Samples between classifications");

    // train-lstm
    auto* tl = app.add_subcommand("train-lstm", "Train the LSTM zero-velocity classifier");
    std::vector<std::string> tl_trials, tl_val;
    std::string tl_out, tl_config;
    std::optional<std::uint64_t> tl_seed;
    tl->add_option("--trials", tl_trials, "Labelled trial directories")->required();
    tl->add_option("--validation-trials", tl_val, "Held-out trial directories for model selection");
    tl->add_option("--config", tl_config, "Training config JSON");
    tl->add_option("--seed", tl_seed, "Override the training seed");
    tl->add_option("--out", tl_out, "Model JSON")->required();

    // classify-lstm
    auto* cl = app.add_subcommand("classify-lstm", "Zero-velocity flags from an LSTM model");
    std::string cl_model, cl_in, cl_out, cl_prob;
    double cl_gate = 0.85;
    cl->add_option("--model", cl_model, "LSTM model JSON")->required();
    cl->add_option("--trial", cl_in, "Trial directory or IMU CSV")->required();
    cl->add_option("--out", cl_out, "Output labels CSV t,zv")->required();
    cl->add_option("--gate", cl_gate, "Confidence gate on p_zero");
    cl->add_option("--probabilities", cl_prob, "Optional CSV t,p_zero");

    // estimate
    auto* est = app.add_subcommand("estimate", "Run the filter end to end");
    std::string est_trial, est_detector = "shoe", est_config, est_out, est_model;
    std::optional<double> est_threshold;
    est->add_option("--trial", est_trial, "Trial directory or IMU CSV")->required();
    est->add_option("--detector", est_detector, "shoe, ared, adaptive or lstm")
        ->check(CLI::IsMember({"shoe", "ared", "adaptive", "lstm"}));
    est->add_option("--config", est_config, "Pipeline config JSON");
    est->add_option("--model", est_model, "Model JSON for adaptive (SVM) or lstm");
    est->add_option("--threshold", est_threshold, "Override the detector threshold");
    est->add_option("--out", est_out, "Trajectory CSV")->required();

    // retarget
    auto* rt = app.add_subcommand("retarget", "Emulate a lower-rate, noisier IMU");
    std::string rt_in, rt_spec, rt_out;
    rt->add_option("--in", rt_in, "IMU CSV or trial directory")->required();
    rt->add_option("--spec", rt_spec, "Retarget spec JSON")->required();
    rt->add_option("--out", rt_out, "IMU CSV or trial directory")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score a trajectory against ground truth");
    std::string ev_traj, ev_gt, ev_report;
    std::optional<double> ev_height, ev_tfar;
    ev->add_option("--traj", ev_traj, "Trajectory CSV")->required();
    ev->add_option("--gt", ev_gt, "Ground-truth positions CSV (or a trajectory CSV)")->required();
    ev->add_option("--report", ev_report, "Output JSON report")->required();
    ev->add_option("--known-height", ev_height, "Known height at the furthest point, m");
    ev->add_option("--t-furthest", ev_tfar, "Time of the furthest point, s");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sim) {
            GaitProfile p = config::gait_profile(config::read_json(sim_profile), sim_profile);
            if (sim_seed) p.seed = *sim_seed;
            const auto s = simulate(p, sim_duration);
            write_trial(sim_out, s.trial,
                        {{"gait", to_string(p.motion)}, {"duration", sim_duration}, {"path_length", s.path_length},
                         {"seed", p.seed}});
        } else if (*lab) {
            const auto cfg = load_config(lab_config);
            const TrialRecord trial = read_trial(lab_trial);
            std::vector<DetectorKind> kinds;
            std::stringstream ss(lab_detectors);
            for (std::string tok; std::getline(ss, tok, ',');)
                if (!tok.empty()) kinds.push_back(detector_from_string(tok));
            const auto res = label_trial(trial, kinds, cfg.grids, cfg.filter, cfg.search);
            fs::create_directories(lab_out);
            csv::write_labels((fs::path(lab_out) / "labels.csv").string(), trial.imu.times(), res.labels);
            write_json((fs::path(lab_out) / "label_report.json").string(), to_json(res));
            std::cout << "winner " << to_string(res.winner) << " gamma " << res.gamma << " armse " << res.armse << '\n';
        } else if (*tsvm) {
            std::mt19937_64 rng(tsvm_seed);
            std::vector<MotionWindow> x;
            std::vector<Motion> y;
            for (const auto& dir : tsvm_trials) {
                const auto trial = read_trial(dir);
                if (!trial.motion) fail(dir + ": trial.json has no motion label");
                for (auto& w : sample_motion_windows(trial.imu, tsvm_windows, rng, !tsvm_no_rotate)) {
                    x.push_back(std::move(w));
                    y.push_back(*trial.motion);
                }
            }
            write_json(tsvm_out, to_json(train_svm(x, y, tsvm_cfg)));
        } else if (*cls) {
            const auto model = svm_from_json(config::read_json(cls_model));
            if (cls_cadence < 1) fail("--cadence must be >= 1");
            write_motion_trace(cls_out, load_imu(cls_in), model, cls_cadence);
        } else if (*tl) {
            TrainConfig tc;
            int per_trial = 7000;
            if (!tl_config.empty()) {
                json j = config::read_json(tl_config);
                config::check_schema(j, tl_config);
                j.erase("schema_version");
                tc = config::train_config(j, tl_config, &per_trial);
            }
            if (tl_seed) tc.seed = *tl_seed;
            std::mt19937_64 rng(tc.seed);
            auto collect = [&](const std::vector<std::string>& dirs) {
                std::vector<TrainSample> out;
                for (const auto& d : dirs) {
                    auto s = make_train_samples(load_labelled_trial(d), per_trial, rng);
                    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
                }
                return out;
            };
            const auto train_set = collect(tl_trials);
            TrainHistory hist;
            LstmModel model;
            if (tl_val.empty()) {
                model = train(train_set, tc, &hist);
            } else {
                const auto val_set = collect(tl_val);
                model = train(train_set, val_set, tc, &hist);
            }
            json j = to_json(model);
            j["training"] = {{"epochs", tc.epochs},
                             {"best_epoch", hist.best_epoch},
                             {"initial_train_loss", hist.initial_train_loss},
                             {"best_validation_loss", hist.validation_loss.at(static_cast<std::size_t>(hist.best_epoch))}};
            write_json(tl_out, j);
        } else if (*cl) {
            const auto model = lstm_from_json(config::read_json(cl_model));
            const auto seq = load_imu(cl_in);
            std::vector<double> p;
            const auto flags = classify(model, seq, cl_gate, &p);
            csv::write_labels(cl_out, seq.times(), flags);
            if (!cl_prob.empty()) {
                auto out = csv::open_out(cl_prob);
                out << "t,p_zero\n";
                for (std::size_t k = 0; k < seq.size(); ++k)
                    out << csv::format_double(seq[k].t) << ',' << csv::format_double(p[k]) << '\n';
            }
        } else if (*est) {
            const auto cfg = load_config(est_config);
            const auto seq = load_imu(est_trial);
            StationaryFlags flags;
            if (est_detector == "shoe") {
                ShoeParams sp = cfg.detector.shoe;
                if (est_threshold) sp.threshold = *est_threshold;
                flags = flags_of(detect_sequence(seq, DetectorKind::shoe, sp));
            } else if (est_detector == "ared") {
                ShoeParams sp = cfg.detector.shoe;
                sp.threshold = est_threshold.value_or(cfg.detector.ared_threshold);
                flags = flags_of(detect_sequence(seq, DetectorKind::ared, sp));
            } else if (est_detector == "adaptive") {
                if (est_model.empty()) fail("--detector adaptive needs --model (SVM)");
                const auto model = svm_from_json(config::read_json(est_model));
                const auto table = est_threshold ? ThresholdTable::uniform(*est_threshold) : cfg.adaptive;
                flags = adaptive_detect(seq, model, table, cfg.detector.shoe, cfg.adaptive_options).flags;
            } else {
                if (est_model.empty()) fail("--detector lstm needs --model");
                const auto model = lstm_from_json(config::read_json(est_model));
                flags = classify(model, seq, est_threshold.value_or(cfg.detector.lstm_gate));
            }
            write_trajectory(est_out, run_filter(seq, flags, cfg.filter));
        } else if (*rt) {
            const auto spec = config::retarget_spec(config::read_json(rt_spec), rt_spec);
            if (fs::is_directory(rt_in)) {
                const auto trial = read_trial(rt_in);
                write_trial(rt_out, retarget_trial(trial, spec), {{"retarget", json::parse(std::ifstream(rt_spec))}});
            } else {
                csv::write_imu(rt_out, retarget(csv::read_imu(rt_in), spec));
            }
        } else if (*ev) {
            const auto traj = read_trajectory(ev_traj);
            if (traj.empty()) throw Error(ErrorKind::parse, ev_traj + ": empty trajectory");
            const auto gt = load_positions(ev_gt);
            const auto lc = loop_closure(traj);
            json j;
            j["schema_version"] = 1;
            j["armse"] = armse(traj, gt);
            j["loop_closure"] = {{"error_3d", lc.error_3d}, {"error_vertical", lc.error_vertical}};
            if (ev_height.has_value() != ev_tfar.has_value()) fail("--known-height and --t-furthest go together");
            if (ev_height) j["furthest_point_vertical"] = furthest_point_vertical(traj, *ev_height, *ev_tfar);
            write_json(ev_report, j);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::parse: return 2;
            case ErrorKind::divergence: return 3;
            default: return 1;
        }
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
