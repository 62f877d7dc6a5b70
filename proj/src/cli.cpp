#include "sasv/cli.hpp"

#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "sasv/baselines.hpp"
#include "sasv/binary_io.hpp"
#include "sasv/checkpoint.hpp"
#include "sasv/error.hpp"
#include "sasv/fusionnet.hpp"
#include "sasv/metrics.hpp"
#include "sasv/syndata.hpp"

namespace fs = std::filesystem;

namespace sasv::cli {

std::string serialize_scores(const std::vector<Trial>& trials, std::span<const double> scores) {
    if (trials.size() != scores.size()) throw Error(ErrorCode::ShapeMismatch, "trial and score counts differ");
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < trials.size(); ++i) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), scores[i]);
        out += trials[i].speaker_id;
        out += ' ';
        out += trials[i].test_utt_id;
        out += ' ';
        out.append(buf, ptr);
        out += '\n';
    }
    return out;
}

std::vector<double> parse_scores(std::string_view text, const std::vector<Trial>& trials) {
    std::map<std::pair<std::string, std::string>, double> by_key;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string speaker, utt, value, extra;
        if (!(fields >> speaker) || speaker.front() == '#') continue;
        if (!(fields >> utt >> value) || (fields >> extra)) {
            throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": expected 3 fields");
        }
        double score = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), score);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": bad score '" + value + "'");
        }
        by_key[{speaker, utt}] = score;
    }
    std::vector<double> scores;
    scores.reserve(trials.size());
    for (const auto& t : trials) {
        auto it = by_key.find({t.speaker_id, t.test_utt_id});
        if (it == by_key.end()) {
            throw Error(ErrorCode::MissingUtterance, "no score for trial " + t.speaker_id + " " + t.test_utt_id);
        }
        scores.push_back(it->second);
    }
    return scores;
}

namespace {

struct Common {
    std::size_t threads = 1;
    std::string strategy = "mean-of-normalized";
    std::string out_dir;
};

struct TrainOpts {
    std::string train_trials, dev_trials, enroll, dev_enroll;
    std::vector<std::string> asv, cm;
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    double target_weight = 1.0;
};

struct EvalOpts {
    std::string checkpoint, trials, enroll, sv_scores, cm_scores, baseline2;
    std::vector<std::string> asv, cm;
    bool baseline1 = false;
    double cm_scale = 1.0;
    std::size_t hist_bins = 0;
    bool det = false;
    std::size_t det_points = 0;
};

struct SynthOpts {
    SyntheticCorpusSpec spec;
    std::size_t asv_models = 2;
    std::size_t cm_models = 2;
    std::size_t dim = 16;
    double speaker_strength = 3.0;
    double artifact_strength = 3.0;
};

ProtocolSet load_protocol(const std::string& trials_path, const std::string& enroll_path, const std::string& name) {
    auto trials = parse_trials(io::read_file(trials_path));
    auto enrollment = parse_enrollment(io::read_file(enroll_path));
    return validate_protocol(std::move(trials), std::move(enrollment), name);
}

std::vector<EmbeddingTable> load_tables(const std::vector<std::string>& paths) {
    std::vector<EmbeddingTable> tables;
    for (const auto& p : paths) tables.push_back(load_embeddings_auto(p));
    return tables;
}

fs::path prepare_out(const std::string& dir) {
    fs::path out(dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw Error(ErrorCode::IoError, "cannot create output directory " + dir);
    return out;
}

TrainConfig make_config(const TrainOpts& o) {
    TrainConfig c;
    c.learning_rate = o.lr;
    c.batch_size = o.batch_size;
    c.epochs = o.epochs;
    c.seed = o.seed;
    c.class_weights.target = o.target_weight;
    c.validate();
    return c;
}

std::vector<TrialLabel> labels_of(const ProtocolSet& p) {
    std::vector<TrialLabel> labels;
    for (const auto& t : p.trials) labels.push_back(t.label);
    return labels;
}

int cmd_gen_synth(const SynthOpts& o, const Common& common, std::ostream& out) {
    SyntheticCorpusSpec spec = o.spec;
    spec.asv_models.assign(o.asv_models, AsvModelSpec{o.dim, o.speaker_strength});
    spec.cm_models.assign(o.cm_models, CmModelSpec{o.dim, o.artifact_strength});
    const auto corpus = generate(spec);
    const auto dir = prepare_out(common.out_dir);

    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, std::string_view contents) {
        io::write_file(dir / name, contents);
        written.push_back(dir / name);
    };
    emit("train_trials.txt", serialize_trials(corpus.train.trials));
    emit("dev_trials.txt", serialize_trials(corpus.dev.trials));

    EnrollmentMap enrollment = corpus.train.enrollment;
    for (const auto& [speaker, utts] : corpus.dev.enrollment.entries()) {
        for (const auto& u : utts) enrollment.add(speaker, u);
    }
    emit("enroll.txt", serialize_enrollment(enrollment));
    for (const auto& t : corpus.asv_tables) emit(t.model_id() + ".sveb", serialize_embeddings_binary(t));
    for (const auto& t : corpus.cm_tables) emit(t.model_id() + ".sveb", serialize_embeddings_binary(t));

    // Single-system scores for Baseline1: first ASV model cosine, first CM model probe.
    for (const auto* part : {&corpus.train, &corpus.dev}) {
        ScoringOptions so;
        so.threads = common.threads;
        so.strategy = parse_strategy(common.strategy);
        const auto sv = compute_sv_scores(*part, std::span(corpus.asv_tables).first(1), so).column(0);
        emit(part->partition_name + "_sv_scores.txt", serialize_scores(part->trials, sv));
        emit(part->partition_name + "_cm_scores.txt", serialize_scores(part->trials, corpus.cm_scores(*part, 0)));
    }

    std::string manifest;
    for (const auto& p : written) manifest += p.string() + "\n";
    io::write_file(dir / "manifest.txt", manifest);
    out << manifest;
    return 0;
}

int cmd_train(const TrainOpts& o, const Common& common, std::ostream& out) {
    const auto config = make_config(o);
    const auto train_set = load_protocol(o.train_trials, o.enroll, "train");
    const auto dev_set = load_protocol(o.dev_trials, o.dev_enroll.empty() ? o.enroll : o.dev_enroll, "dev");
    const auto asv = load_tables(o.asv);
    const auto cm = load_tables(o.cm);
    const auto dir = prepare_out(common.out_dir);

    ScoringOptions so;
    so.threads = common.threads;
    so.strategy = parse_strategy(common.strategy);
    const auto train_data = build_fusion_dataset(train_set, asv, cm, so);
    const auto dev_data = build_fusion_dataset(dev_set, asv, cm, so);

    const auto result = train(train_data.items, dev_data, dims_for(asv, cm), config);
    save_checkpoint(dir / "checkpoint.sasv", {result.best_params, result.best_adam});
    io::write_file(dir / "history.csv", history_to_csv(result.history));
    out << "best_epoch=" << result.best_epoch << " epochs=" << result.history.size() << "\n";
    out << (dir / "checkpoint.sasv").string() << "\n" << (dir / "history.csv").string() << "\n";
    return 0;
}

int cmd_baseline2_train(const TrainOpts& o, const Common& common, std::ostream& out) {
    if (o.asv.size() != 1 || o.cm.size() != 1) {
        throw Error(ErrorCode::InvalidArgument, "baseline2 takes exactly one --asv and one --cm table");
    }
    const auto config = make_config(o);
    const auto train_set = load_protocol(o.train_trials, o.enroll, "train");
    const auto dev_set = load_protocol(o.dev_trials, o.dev_enroll.empty() ? o.enroll : o.dev_enroll, "dev");
    const auto asv = load_embeddings_auto(o.asv.front());
    const auto cm = load_embeddings_auto(o.cm.front());
    const auto dir = prepare_out(common.out_dir);

    const auto strategy = parse_strategy(common.strategy);
    const auto train_items = baseline2_inputs(train_set, asv, cm, strategy);
    const auto dev_items = baseline2_inputs(dev_set, asv, cm, strategy);
    const auto labels = labels_of(dev_set);
    const auto result = train_baseline2(train_items, dev_items, labels, asv.dim(), cm.dim(), config);
    save_baseline2(dir / "baseline2.sb2n", {result.best_params, result.best_adam});
    io::write_file(dir / "history.csv", history_to_csv(result.history));
    out << "best_epoch=" << result.best_epoch << " epochs=" << result.history.size() << "\n";
    out << (dir / "baseline2.sb2n").string() << "\n" << (dir / "history.csv").string() << "\n";
    return 0;
}

void write_reports(const EvalOpts& o, const fs::path& dir, const ProtocolSet& protocol,
                   const std::vector<double>& scores, std::ostream& out) {
    const auto scored = attach_labels(protocol.trials, scores);
    const auto report = compute_report(scored);
    const auto text = report_to_text(report);
    io::write_file(dir / "report.txt", text);
    io::write_file(dir / "report.json", report_to_json(report));
    io::write_file(dir / "scores.txt", serialize_scores(protocol.trials, scores));
    if (o.hist_bins > 0) io::write_file(dir / "histogram.csv", histogram_to_csv(histogram(scored, o.hist_bins)));
    if (o.det) {
        std::vector<double> pos, neg;
        for (const auto& s : scored) (s.label == TrialLabel::Target ? pos : neg).push_back(s.score);
        io::write_file(dir / "det.csv", det_to_csv(det_curve(pos, neg, o.det_points)));
    }
    out << text;
}

int cmd_baseline1(const EvalOpts& o, const Common& common, std::ostream& out) {
    const auto trials = parse_trials(io::read_file(o.trials));
    ProtocolSet protocol;
    protocol.trials = trials;
    for (const auto& t : trials) ++protocol.counts[t.label];
    const auto sv = parse_scores(io::read_file(o.sv_scores), trials);
    auto cm = parse_scores(io::read_file(o.cm_scores), trials);
    for (double& c : cm) c *= o.cm_scale;
    const auto dir = prepare_out(common.out_dir);
    write_reports(o, dir, protocol, baseline1_scores(sv, cm), out);
    return 0;
}

int cmd_evaluate(const EvalOpts& o, const Common& common, std::ostream& out) {
    if (o.baseline1) return cmd_baseline1(o, common, out);

    const auto protocol = load_protocol(o.trials, o.enroll, "eval");
    const auto asv = load_tables(o.asv);
    const auto cm = load_tables(o.cm);
    const auto strategy = parse_strategy(common.strategy);

    std::vector<double> scores;
    if (!o.baseline2.empty()) {
        if (asv.size() != 1 || cm.size() != 1) {
            throw Error(ErrorCode::InvalidArgument, "baseline2 takes exactly one --asv and one --cm table");
        }
        const auto cp = load_baseline2(o.baseline2);
        if (cp.params.asv_dim != asv.front().dim() || cp.params.cm_dim != cm.front().dim()) {
            throw Error(ErrorCode::ShapeMismatch, "embedding dims do not match the Baseline2 checkpoint");
        }
        for (const auto& item : baseline2_inputs(protocol, asv.front(), cm.front(), strategy)) {
            scores.push_back(baseline2_score(cp.params, item.input));
        }
    } else {
        if (o.checkpoint.empty()) throw Error(ErrorCode::InvalidArgument, "--checkpoint, --baseline1 or --baseline2 is required");
        const auto cp = load_checkpoint(o.checkpoint);
        ScoringOptions so;
        so.threads = common.threads;
        so.strategy = strategy;
        const auto data = build_fusion_dataset(protocol, asv, cm, so);
        scores = predict_scores(cp.params, data);
    }
    const auto dir = prepare_out(common.out_dir);
    write_reports(o, dir, protocol, scores, out);
    return 0;
}

bool is_true(std::string value) {
    for (auto& c : value) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return value == "1" || value == "true" || value == "yes" || value == "on";
}

// Expands "--config FILE" into flags for keys not already given on the command line.
std::vector<std::string> apply_config(const std::vector<std::string>& args, CLI::App& app) {
    std::vector<std::string> rest;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (config_path.empty()) return rest;

    CLI::App* sub = nullptr;
    for (const auto& a : rest) {
        if (!a.empty() && a[0] != '-') {
            sub = app.get_subcommand_no_throw(a);
            break;
        }
    }
    auto given = [&](const std::string& key) {
        for (const auto& a : rest) {
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        }
        return false;
    };

    std::istringstream in(io::read_file(config_path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::MalformedLine, config_path + " line " + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (given(key)) continue;

        const CLI::Option* opt = sub ? sub->get_option_no_throw("--" + key) : nullptr;
        if (opt == nullptr) {
            throw Error(ErrorCode::InvalidArgument, config_path + ": unknown key '" + key + "'");
        }
        if (opt->get_expected_min() == 0) {
            if (is_true(value)) rest.push_back("--" + key);
            continue;
        }
        std::istringstream values(value);
        std::string v;
        while (values >> v) {
            rest.push_back("--" + key);
            rest.push_back(v);
        }
    }
    return rest;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fusion toolkit for spoofing-aware speaker verification"};
    app.require_subcommand(1);

    Common common;
    SynthOpts synth;
    TrainOpts train_opts;
    EvalOpts eval;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", common.out_dir, "Output directory")->required();
        sub->add_option("--threads", common.threads, "Trial-level scoring threads")->check(CLI::PositiveNumber);
        sub->add_option("--strategy", common.strategy, "mean-of-normalized | mean-raw | score-mean");
    };

    auto* gen = app.add_subcommand("gen-synth", "Write a synthetic corpus");
    add_common(gen);
    gen->add_option("--seed", synth.spec.seed);
    gen->add_option("--train-speakers", synth.spec.train_speakers);
    gen->add_option("--dev-speakers", synth.spec.dev_speakers);
    gen->add_option("--utts", synth.spec.utts_per_speaker, "Bona fide utterances per speaker");
    gen->add_option("--spoofs", synth.spec.spoofs_per_speaker, "Spoofed utterances per speaker");
    gen->add_option("--asv-models", synth.asv_models);
    gen->add_option("--cm-models", synth.cm_models);
    gen->add_option("--dim", synth.dim, "Embedding dim of every model");
    gen->add_option("--speaker-strength", synth.speaker_strength);
    gen->add_option("--artifact-strength", synth.artifact_strength);
    gen->add_option("--noise", synth.spec.noise_std);

    auto add_train = [&](CLI::App* sub) {
        add_common(sub);
        sub->add_option("--train-trials", train_opts.train_trials)->required();
        sub->add_option("--dev-trials", train_opts.dev_trials)->required();
        sub->add_option("--enroll", train_opts.enroll, "Enrollment map (train, and dev unless --dev-enroll)")->required();
        sub->add_option("--dev-enroll", train_opts.dev_enroll);
        sub->add_option("--asv", train_opts.asv, "ASV embedding file (repeatable)")->required();
        sub->add_option("--cm", train_opts.cm, "CM embedding file (repeatable)")->required();
        sub->add_option("--lr", train_opts.lr, "Initial learning rate");
        sub->add_option("--batch-size", train_opts.batch_size);
        sub->add_option("--epochs", train_opts.epochs);
        sub->add_option("--seed", train_opts.seed);
        sub->add_option("--target-weight", train_opts.target_weight, "Loss weight of target trials");
    };
    auto* train_cmd = app.add_subcommand("train", "Train the fusion network");
    add_train(train_cmd);
    auto* b2_cmd = app.add_subcommand("baseline2-train", "Train the embedding-concatenation baseline");
    add_train(b2_cmd);

    auto* eval_cmd = app.add_subcommand("evaluate", "Score a protocol and report EERs");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Fusion checkpoint");
    eval_cmd->add_option("--trials", eval.trials)->required();
    eval_cmd->add_option("--enroll", eval.enroll);
    eval_cmd->add_option("--asv", eval.asv);
    eval_cmd->add_option("--cm", eval.cm);
    eval_cmd->add_flag("--baseline1", eval.baseline1, "Score-sum of --sv-scores and --cm-scores");
    eval_cmd->add_option("--baseline2", eval.baseline2, "Baseline2 checkpoint");
    eval_cmd->add_option("--sv-scores", eval.sv_scores);
    eval_cmd->add_option("--cm-scores", eval.cm_scores);
    eval_cmd->add_option("--cm-scale", eval.cm_scale, "Multiplier on CM scores (Baseline1)");
    eval_cmd->add_option("--hist-bins", eval.hist_bins, "Write histogram.csv with this many bins");
    eval_cmd->add_flag("--det", eval.det, "Write det.csv");
    eval_cmd->add_option("--det-points", eval.det_points, "Thin the DET curve (0 = all)");

    auto* b1_cmd = app.add_subcommand("baseline1", "Score-sum fusion of two score files");
    add_common(b1_cmd);
    b1_cmd->add_option("--trials", eval.trials)->required();
    b1_cmd->add_option("--sv-scores", eval.sv_scores)->required();
    b1_cmd->add_option("--cm-scores", eval.cm_scores)->required();
    b1_cmd->add_option("--cm-scale", eval.cm_scale);
    b1_cmd->add_option("--hist-bins", eval.hist_bins);
    b1_cmd->add_flag("--det", eval.det);
    b1_cmd->add_option("--det-points", eval.det_points);

    try {
        auto expanded = apply_config(args, app);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_synth(synth, common, out);
        if (train_cmd->parsed()) return cmd_train(train_opts, common, out);
        if (b2_cmd->parsed()) return cmd_baseline2_train(train_opts, common, out);
        if (eval_cmd->parsed()) {
            if (eval.baseline1 && (eval.sv_scores.empty() || eval.cm_scores.empty())) {
                throw Error(ErrorCode::InvalidArgument, "--baseline1 needs --sv-scores and --cm-scores");
            }
            if (!eval.baseline1 && eval.enroll.empty()) throw Error(ErrorCode::InvalidArgument, "--enroll is required");
            return cmd_evaluate(eval, common, out);
        }
        if (b1_cmd->parsed()) return cmd_baseline1(eval, common, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace sasv::cli
