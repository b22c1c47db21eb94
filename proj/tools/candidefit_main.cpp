/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: tools/candidefit_main.cpp
 *
 * Copyright 2026 The candidefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * Command-line pipeline: synth -> fit/personalize -> extract -> train ->
 * eval -> report. Every command writes a manifest next to its outputs and is
 * reproducible from its recorded configuration and seed.
 */
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "candide/features.hpp"
#include "candide/fitting.hpp"
#include "candide/manifest.hpp"
#include "candide/metrics.hpp"
#include "candide/mlp.hpp"
#include "candide/model.hpp"
#include "candide/svm.hpp"
#include "candide/synth.hpp"
#include "candide/version.hpp"

namespace fs = std::filesystem;
using namespace candide;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_numeric = 3;

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

class Stopwatch
{
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double milliseconds() const
    {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_file(const std::string& path)
{
    if (!fs::exists(path))
        throw UsageError("input file does not exist: " + path);
}

void ensure_directory(const std::string& path)
{
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec)
        throw UsageError("cannot create output directory: " + path);
}

model::CandideModel load_model_checked(const std::string& path)
{
    require_file(path);
    return model::load_model(path);
}

model::Correspondence load_corr_checked(const std::string& path, const model::CandideModel& m)
{
    require_file(path);
    return model::load_correspondence(path, m);
}

int fit_thread_count(std::size_t frames)
{
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1)
        threads = 1;
    if (const char* cap = std::getenv("CANDIDE_FIT_THREADS"))
    {
        const int requested = std::atoi(cap);
        if (requested >= 1)
            threads = std::min(threads, requested);
    }
    return std::max(1, std::min<int>(threads, static_cast<int>(frames)));
}

std::vector<std::string> class_list(const std::vector<std::string>& labels)
{
    std::set<std::string> unique(labels.begin(), labels.end());
    return {unique.begin(), unique.end()};
}

json pose_to_json(const fitting::FrameFit& fit)
{
    auto vec = [](const Eigen::VectorXd& v) {
        json out = json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out.push_back(v[i]);
        return out;
    };
    json record{{"tau", fit.tau},
                {"s", fit.params.scale},
                {"w",
                 {fit.params.rotation.x(), fit.params.rotation.y(), fit.params.rotation.z()}},
                {"t", {fit.params.translation.x(), fit.params.translation.y()}},
                {"a_shape", vec(fit.params.shape_coeffs)},
                {"a_action", vec(fit.params.action_coeffs)},
                {"rmse", fit.rmse},
                {"iterations", fit.iterations}};
    if (fit.diverged)
        record["diverged"] = true;
    return record;
}

void print_distrust_table(const fitting::PersonalizeResult& result, double threshold,
                          std::ostream& out)
{
    out << "  Distrust      Mean  Variance     Sigma  Coefficient name\n";
    out << "  --------------------------------------------------------\n";
    bool rule_printed = false;
    for (const auto& record : result.records)
    {
        if (!rule_printed && record.distrust >= threshold)
        {
            out << "  --------------------------- threshold " << threshold << '\n';
            rule_printed = true;
        }
        char line[160];
        std::snprintf(line, sizeof(line), "  %8.3f  %8.3f  %8.3f  %8.3f  %s\n", record.distrust,
                      record.mean, record.variance, record.sigma, record.unit_name.c_str());
        out << line;
    }
}

// ---------------------------------------------------------------- synth ---

struct SynthArgs
{
    std::string model_path;
    std::string corr_path;
    std::string out_dir;
    synth::SynthSpec spec;
    bool no_augment = false;
    bool quiet = false;
};

int run_synth(const SynthArgs& args)
{
    Stopwatch watch;
    const auto m = load_model_checked(args.model_path);
    const auto corr = load_corr_checked(args.corr_path, m);

    synth::SynthSpec spec = args.spec;
    spec.augment.enabled = !args.no_augment;
    try
    {
        spec.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(e.what());
    }

    ensure_directory(args.out_dir);
    const auto dataset = synth::generate_dataset(spec, m, corr);
    synth::write_dataset(args.out_dir, dataset);

    cli::RunManifest manifest;
    manifest.command = "synth";
    manifest.inputs = {args.model_path, args.corr_path};
    manifest.outputs = {"train.csv", "test.csv", "truth.jsonl"};
    manifest.seed = spec.seed;
    manifest.config = {{"n_per_class", std::to_string(spec.n_per_class)},
                       {"train_yaw", fmt(spec.train_yaw)},
                       {"noise_sigma", fmt(spec.noise_sigma)},
                       {"resolution", fmt(spec.resolution)},
                       {"scale_lo", fmt(spec.scale_lo)},
                       {"scale_hi", fmt(spec.scale_hi)},
                       {"center_jitter", fmt(spec.center_jitter)},
                       {"shape_base_sigma", fmt(spec.shape_base_sigma)},
                       {"shape_jitter_sigma", fmt(spec.shape_jitter_sigma)},
                       {"intensity_lo", fmt(spec.intensity_lo)},
                       {"intensity_hi", fmt(spec.intensity_hi)},
                       {"augment", spec.augment.enabled ? "on" : "off"}};
    for (std::size_t k = 0; k < spec.test_yaws.size(); ++k)
        manifest.config["test_yaw_" + std::to_string(k)] = fmt(spec.test_yaws[k]);
    manifest.wall_time_ms = watch.milliseconds();
    cli::write_manifest(args.out_dir, manifest);

    if (!args.quiet)
        std::cout << "synth: " << dataset.train_frames.size() << " train frames, "
                  << dataset.test_frames.size() << " test frames -> " << args.out_dir << '\n';
    return exit_ok;
}

// ------------------------------------------------------------------ fit ---

struct FitArgs
{
    std::string model_path;
    std::string corr_path;
    std::string data_path;
    std::string out_dir;
    std::string mode = "action";
    std::string su_path;
    double threshold = 0.25;
    bool quiet = false;
};

int run_fit(const FitArgs& args)
{
    Stopwatch watch;
    const auto m = load_model_checked(args.model_path);
    const auto corr = load_corr_checked(args.corr_path, m);
    require_file(args.data_path);
    const auto data = synth::read_landmark_csv(args.data_path);
    ensure_directory(args.out_dir);

    cli::RunManifest manifest;
    manifest.command = "fit";
    manifest.inputs = {args.model_path, args.corr_path, args.data_path};
    manifest.config = {{"mode", args.mode}, {"threshold", fmt(args.threshold)}};

    if (args.mode == "personalize")
    {
        std::vector<fitting::LandmarkFrame> neutral;
        for (std::size_t k = 0; k < data.frames.size(); ++k)
        {
            if (data.labels[k] == "neutral")
                neutral.push_back(data.frames[k]);
        }
        if (neutral.size() < 2)
            throw UsageError("insufficient frames: personalization needs at least 2 neutral "
                             "frames, got " +
                             std::to_string(neutral.size()));
        const auto result = fitting::personalize(neutral, m, corr, args.threshold);

        json su_json;
        su_json["threshold"] = args.threshold;
        su_json["shape_coeffs"] = json::array();
        for (Eigen::Index d = 0; d < result.shape_coeffs.size(); ++d)
            su_json["shape_coeffs"].push_back(result.shape_coeffs[d]);
        su_json["records"] = json::array();
        for (const auto& record : result.records)
            su_json["records"].push_back({{"unit", record.unit_name},
                                          {"mean", record.mean},
                                          {"variance", record.variance},
                                          {"sigma", record.sigma},
                                          {"distrust", record.distrust},
                                          {"trusted", record.distrust < args.threshold}});
        su_json["diverged_frames"] = result.diverged_frames;
        std::ofstream out(args.out_dir + "/su.json");
        out << su_json.dump(2) << '\n';

        if (!args.quiet)
            print_distrust_table(result, args.threshold, std::cout);

        manifest.outputs = {"su.json"};
        manifest.wall_time_ms = watch.milliseconds();
        cli::write_manifest(args.out_dir, manifest);
        return exit_ok;
    }

    Eigen::VectorXd shape_coeffs = Eigen::VectorXd::Zero(m.shape_unit_count());
    if (!args.su_path.empty())
    {
        require_file(args.su_path);
        std::ifstream in(args.su_path);
        const json su_json = json::parse(in);
        const auto& coeffs = su_json.at("shape_coeffs");
        if (static_cast<int>(coeffs.size()) != m.shape_unit_count())
            throw UsageError("shape coefficient count in " + args.su_path +
                             " does not match the model");
        for (Eigen::Index d = 0; d < shape_coeffs.size(); ++d)
            shape_coeffs[d] = coeffs.at(static_cast<std::size_t>(d)).get<double>();
        manifest.inputs.push_back(args.su_path);
    }
    else if (args.mode == "action" && !args.quiet)
    {
        std::cerr << "fit: no --su given, action fits use the mean face (all shape "
                     "coefficients zero)\n";
    }

    std::vector<fitting::FrameFit> fits;
    if (args.mode == "global")
    {
        const fitting::ResidualSystem system(m, corr, fitting::ParamMask::rigid());
        fits.resize(data.frames.size());
        for (std::size_t k = 0; k < data.frames.size(); ++k)
        {
            auto& fit = fits[k];
            fit.tau = data.frames[k].tau;
            try
            {
                geometry::PoseParams init = geometry::init_pose(data.frames[k].points, m, corr);
                init.shape_coeffs = shape_coeffs;
                const auto result = fitting::lm_minimize(system, init, data.frames[k]);
                fit.params = result.params;
                fit.iterations = result.iterations;
                fit.rmse = fitting::reprojection_rmse(result.params, data.frames[k], m, corr);
            }
            catch (const fitting::DivergedError&)
            {
                fit.diverged = true;
            }
        }
    }
    else if (args.mode == "action")
    {
        fits = fitting::extract_action_units(data.frames, shape_coeffs, m, corr, {},
                                             fit_thread_count(data.frames.size()));
    }
    else
    {
        throw UsageError("unknown fit mode: " + args.mode +
                         " (expected global, personalize or action)");
    }

    std::ofstream out(args.out_dir + "/fits.jsonl");
    std::vector<int> diverged;
    for (const auto& fit : fits)
    {
        out << pose_to_json(fit).dump() << '\n';
        if (fit.diverged)
            diverged.push_back(fit.tau);
    }
    manifest.outputs = {"fits.jsonl"};
    manifest.wall_time_ms = watch.milliseconds();
    cli::write_manifest(args.out_dir, manifest);

    if (!diverged.empty())
    {
        std::cerr << "fit: " << diverged.size() << " frame(s) diverged:";
        for (int tau : diverged)
            std::cerr << ' ' << tau;
        std::cerr << '\n';
        return exit_numeric;
    }
    if (!args.quiet)
        std::cout << "fit: " << fits.size() << " frames -> " << args.out_dir << "/fits.jsonl\n";
    return exit_ok;
}

// -------------------------------------------------------------- extract ---

struct ExtractArgs
{
    std::string kind = "au8";
    std::string fits_path;
    std::string data_path;
    std::string out_dir;
    std::string file_name = "features.csv";
    bool quiet = false;
};

int run_extract(const ExtractArgs& args)
{
    Stopwatch watch;
    require_file(args.data_path);
    const auto data = synth::read_landmark_csv(args.data_path);
    ensure_directory(args.out_dir);

    std::vector<features::FeatureVector> samples;
    cli::RunManifest manifest;
    manifest.command = "extract";
    manifest.config = {{"kind", args.kind}};
    manifest.inputs = {args.data_path};

    if (args.kind == "fp68")
    {
        for (std::size_t k = 0; k < data.frames.size(); ++k)
        {
            auto sample = features::fp68_vector(data.frames[k]);
            sample.label = data.labels[k];
            samples.push_back(std::move(sample));
        }
    }
    else if (args.kind == "au8")
    {
        if (args.fits_path.empty())
            throw UsageError("--fits is required for au8 extraction");
        require_file(args.fits_path);
        manifest.inputs.push_back(args.fits_path);

        std::map<int, std::string> label_of;
        for (std::size_t k = 0; k < data.frames.size(); ++k)
            label_of[data.frames[k].tau] = data.labels[k];

        std::ifstream in(args.fits_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (line.empty())
                continue;
            const json record = json::parse(line);
            if (record.value("diverged", false))
                continue; // dropped from features, reported by fit already
            const int tau = record.at("tau").get<int>();
            const auto label = label_of.find(tau);
            if (label == label_of.end())
                throw UsageError(args.fits_path + ":" + std::to_string(line_no) +
                                 ": tau " + std::to_string(tau) + " not present in " +
                                 args.data_path);
            features::FeatureVector sample;
            sample.kind = features::FeatureKind::au8;
            const auto& coeffs = record.at("a_action");
            sample.values.resize(static_cast<Eigen::Index>(coeffs.size()));
            for (Eigen::Index i = 0; i < sample.values.size(); ++i)
                sample.values[i] = coeffs.at(static_cast<std::size_t>(i)).get<double>();
            sample.label = label->second;
            samples.push_back(std::move(sample));
        }
    }
    else
    {
        throw UsageError("unknown feature kind: " + args.kind + " (expected au8 or fp68)");
    }

    if (samples.empty())
        throw UsageError("no samples extracted");
    features::write_feature_csv(args.out_dir + "/" + args.file_name, samples);
    manifest.outputs = {args.file_name};
    manifest.wall_time_ms = watch.milliseconds();
    cli::write_manifest(args.out_dir, manifest);
    if (!args.quiet)
        std::cout << "extract: " << samples.size() << " samples -> " << args.out_dir << "/"
                  << args.file_name << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------- train ---

struct TrainArgs
{
    std::string features_path;
    std::string classifier = "mlp";
    std::string out_dir;
    std::uint64_t seed = 1;
    double val_fraction = 0.2;
    double svm_c = 1.0;
    int svm_degree = 3;
    double svm_gamma = 0.0;
    double svm_coef0 = 1.0;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 500;
    int patience = 10;
    bool quiet = false;
};

double model_accuracy(const json& model_json, const std::vector<features::FeatureVector>& samples);

json train_model_json(const TrainArgs& args, const std::vector<features::FeatureVector>& samples,
                      std::string& log_text)
{
    const Eigen::Index dim = samples.front().values.size();
    const features::FeatureKind kind =
        dim == 8 ? features::FeatureKind::au8 : features::FeatureKind::fp68;

    std::vector<std::string> labels;
    for (const auto& sample : samples)
        labels.push_back(sample.label);
    const auto classes = class_list(labels);
    if (classes.size() < 2)
        throw UsageError("training needs at least two classes, got " +
                         std::to_string(classes.size()));
    std::map<std::string, int> class_index;
    for (std::size_t k = 0; k < classes.size(); ++k)
        class_index[classes[k]] = static_cast<int>(k);

    const auto stats = features::fit_norm(samples);
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(samples.size()));
    std::vector<int> y;
    for (std::size_t k = 0; k < samples.size(); ++k)
    {
        x.col(static_cast<Eigen::Index>(k)) = features::apply_norm(samples[k], stats).values;
        y.push_back(class_index.at(samples[k].label));
    }

    json model_json;
    model_json["format_version"] = 1;
    model_json["feature_kind"] = features::name_of(kind);
    model_json["classes"] = classes;
    json norm;
    norm["mu"] = json::array();
    norm["sigma"] = json::array();
    for (Eigen::Index i = 0; i < stats.mu.size(); ++i)
    {
        norm["mu"].push_back(stats.mu[i]);
        norm["sigma"].push_back(stats.sigma[i]);
    }
    norm["epsilon"] = stats.epsilon;
    model_json["norm"] = norm;

    std::ostringstream log;
    if (args.classifier == "svm-poly")
    {
        classify::SvmTrainOptions options;
        options.c = args.svm_c;
        options.kernel.degree = args.svm_degree;
        options.kernel.gamma = args.svm_gamma;
        options.kernel.coef0 = args.svm_coef0;
        const auto svm = classify::svm_train(x, y, classes, options);
        model_json["classifier"] = "svm-poly";
        model_json["svm"] = classify::svm_to_json(svm);
        for (const auto& machine : svm.machines)
            log << "pair " << classes[static_cast<std::size_t>(machine.class_a)] << "/"
                << classes[static_cast<std::size_t>(machine.class_b)] << " support_vectors "
                << machine.support_vectors.cols() << '\n';
    }
    else if (args.classifier == "mlp")
    {
        const classify::MlpArch arch = kind == features::FeatureKind::au8
                                           ? classify::MlpArch::au8_net
                                           : classify::MlpArch::fp68_net;
        const auto [train_idx, val_idx] = classify::stratified_split(
            y, static_cast<int>(classes.size()), args.val_fraction, args.seed);
        if (train_idx.empty() || val_idx.empty())
            throw UsageError("training split too small for a validation fraction of " +
                             fmt(args.val_fraction));
        Eigen::MatrixXd train_x(dim, static_cast<Eigen::Index>(train_idx.size()));
        Eigen::MatrixXd val_x(dim, static_cast<Eigen::Index>(val_idx.size()));
        std::vector<int> train_y, val_y;
        for (std::size_t k = 0; k < train_idx.size(); ++k)
        {
            train_x.col(static_cast<Eigen::Index>(k)) = x.col(train_idx[k]);
            train_y.push_back(y[static_cast<std::size_t>(train_idx[k])]);
        }
        for (std::size_t k = 0; k < val_idx.size(); ++k)
        {
            val_x.col(static_cast<Eigen::Index>(k)) = x.col(val_idx[k]);
            val_y.push_back(y[static_cast<std::size_t>(val_idx[k])]);
        }
        classify::TrainConfig config;
        config.seed = args.seed;
        config.learning_rate = args.learning_rate;
        config.batch_size = args.batch_size;
        config.max_epochs = args.max_epochs;
        config.plateau_patience = args.patience;
        const auto result =
            classify::mlp_train(arch, train_x, train_y, val_x, val_y, classes, config);
        model_json["classifier"] = "mlp";
        model_json["mlp"] = classify::mlp_to_json(result.model);
        log << result.log;
    }
    else
    {
        throw UsageError("unknown classifier: " + args.classifier +
                         " (expected svm-poly or mlp)");
    }

    const double accuracy = model_accuracy(model_json, samples);
    log << "final_accuracy " << fmt(accuracy) << '\n';
    log_text = log.str();
    return model_json;
}

int run_train(const TrainArgs& args)
{
    Stopwatch watch;
    require_file(args.features_path);
    const auto samples = features::read_feature_csv(args.features_path);
    ensure_directory(args.out_dir);

    std::string log_text;
    const json model_json = train_model_json(args, samples, log_text);

    {
        std::ofstream out(args.out_dir + "/model.json");
        out << model_json.dump(2) << '\n';
        std::ofstream log(args.out_dir + "/train_log.txt");
        log << log_text;
    }

    cli::RunManifest manifest;
    manifest.command = "train";
    manifest.inputs = {args.features_path};
    manifest.outputs = {"model.json", "train_log.txt"};
    manifest.seed = args.seed;
    manifest.config = {{"classifier", args.classifier},
                       {"val_fraction", fmt(args.val_fraction)},
                       {"svm_c", fmt(args.svm_c)},
                       {"svm_degree", std::to_string(args.svm_degree)},
                       {"svm_gamma", fmt(args.svm_gamma)},
                       {"svm_coef0", fmt(args.svm_coef0)},
                       {"learning_rate", fmt(args.learning_rate)},
                       {"batch_size", std::to_string(args.batch_size)},
                       {"max_epochs", std::to_string(args.max_epochs)},
                       {"patience", std::to_string(args.patience)}};
    manifest.wall_time_ms = watch.milliseconds();
    cli::write_manifest(args.out_dir, manifest);

    if (!args.quiet)
    {
        const auto pos = log_text.rfind("final_accuracy ");
        std::cout << "train: " << args.classifier << " on " << samples.size() << " samples, "
                  << log_text.substr(pos) << std::flush;
    }
    return exit_ok;
}

// ----------------------------------------------------------------- eval ---

features::NormStats norm_from_json(const json& model_json)
{
    const auto& norm = model_json.at("norm");
    features::NormStats stats;
    const auto& mu = norm.at("mu");
    const auto& sigma = norm.at("sigma");
    stats.mu.resize(static_cast<Eigen::Index>(mu.size()));
    stats.sigma.resize(static_cast<Eigen::Index>(sigma.size()));
    for (Eigen::Index i = 0; i < stats.mu.size(); ++i)
    {
        stats.mu[i] = mu.at(static_cast<std::size_t>(i)).get<double>();
        stats.sigma[i] = sigma.at(static_cast<std::size_t>(i)).get<double>();
    }
    stats.epsilon = norm.at("epsilon").get<double>();
    return stats;
}

/// Predicted class index per sample under the serialized model.
std::vector<int> predict_all(const json& model_json,
                             const std::vector<features::FeatureVector>& samples)
{
    const auto stats = norm_from_json(model_json);
    const std::string kind = model_json.at("feature_kind").get<std::string>();
    const Eigen::Index expect_dim = features::dimension_of(features::kind_from_name(kind));
    if (samples.front().values.size() != expect_dim)
        throw UsageError("feature kind mismatch: model expects " + kind + " (dim " +
                         std::to_string(expect_dim) + "), data has dim " +
                         std::to_string(samples.front().values.size()));

    std::vector<int> predictions;
    if (model_json.at("classifier") == "svm-poly")
    {
        const auto svm = classify::svm_from_json(model_json.at("svm"));
        for (const auto& sample : samples)
            predictions.push_back(
                classify::svm_predict_index(svm, features::apply_norm(sample, stats).values));
    }
    else
    {
        const auto mlp = classify::mlp_from_json(model_json.at("mlp"));
        for (const auto& sample : samples)
            predictions.push_back(
                classify::mlp_predict_index(mlp, features::apply_norm(sample, stats).values));
    }
    return predictions;
}

double model_accuracy(const json& model_json, const std::vector<features::FeatureVector>& samples)
{
    const auto classes = model_json.at("classes").get<std::vector<std::string>>();
    std::map<std::string, int> class_index;
    for (std::size_t k = 0; k < classes.size(); ++k)
        class_index[classes[k]] = static_cast<int>(k);
    const auto predictions = predict_all(model_json, samples);
    int correct = 0;
    for (std::size_t k = 0; k < samples.size(); ++k)
    {
        const auto it = class_index.find(samples[k].label);
        if (it != class_index.end() && predictions[k] == it->second)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct EvalArgs
{
    std::string model_path;
    std::string features_path;
    std::string out_dir;
    bool plot_data = false;
    bool quiet = false;
};

int run_eval(const EvalArgs& args)
{
    Stopwatch watch;
    require_file(args.model_path);
    require_file(args.features_path);
    std::ifstream model_in(args.model_path);
    const json model_json = json::parse(model_in);
    const auto samples = features::read_feature_csv(args.features_path);
    ensure_directory(args.out_dir);

    const auto classes = model_json.at("classes").get<std::vector<std::string>>();
    std::map<std::string, int> class_index;
    for (std::size_t k = 0; k < classes.size(); ++k)
        class_index[classes[k]] = static_cast<int>(k);
    for (const auto& sample : samples)
    {
        if (!class_index.count(sample.label))
            throw UsageError("label '" + sample.label + "' is not a class of the model");
    }

    const auto predictions = predict_all(model_json, samples);
    metrics::ConfusionMatrix confusion(static_cast<int>(classes.size()));
    for (std::size_t k = 0; k < samples.size(); ++k)
        confusion.add(class_index.at(samples[k].label), predictions[k]);

    const json report = metrics::report_json(confusion, classes);
    {
        std::ofstream out(args.out_dir + "/report.json");
        out << report.dump(2) << '\n';
    }

    cli::RunManifest manifest;
    manifest.command = "eval";
    manifest.inputs = {args.model_path, args.features_path};
    manifest.outputs = {"report.json"};
    manifest.config = {{"plot_data", args.plot_data ? "on" : "off"}};
    if (args.plot_data)
    {
        std::ofstream plot(args.out_dir + "/plot_data.csv");
        plot << "class,precision,recall,f1,support\n";
        const auto stats = metrics::per_class_stats(confusion);
        for (std::size_t k = 0; k < classes.size(); ++k)
            plot << classes[k] << ',' << fmt(stats[k].precision) << ',' << fmt(stats[k].recall)
                 << ',' << fmt(stats[k].f1) << ',' << stats[k].support << '\n';
        manifest.outputs.push_back("plot_data.csv");
    }
    manifest.wall_time_ms = watch.milliseconds();
    cli::write_manifest(args.out_dir, manifest);

    if (!args.quiet)
        std::cout << "eval: accuracy " << report["accuracy"].get<double>() << " kappa "
                  << report["kappa"].get<double>() << " weighted_f1 "
                  << report["weighted_f1"].get<double>() << '\n';
    return exit_ok;
}

// --------------------------------------------------------------- report ---

struct ReportArgs
{
    std::string report_path;
    std::string plot_path;
};

int run_report(const ReportArgs& args)
{
    require_file(args.report_path);
    std::ifstream in(args.report_path);
    const json report = json::parse(in);

    const auto classes = report.at("classes").get<std::vector<std::string>>();
    std::cout << "classes:";
    for (const auto& name : classes)
        std::cout << ' ' << name;
    std::cout << '\n';
    std::cout << "confusion matrix (rows true, columns predicted):\n";
    for (const auto& row : report.at("confusion"))
    {
        for (const auto& cell : row)
            std::cout << '\t' << cell.get<std::int64_t>();
        std::cout << '\n';
    }
    std::cout << "accuracy     " << report.at("accuracy").get<double>() << '\n';
    std::cout << "kappa        " << report.at("kappa").get<double>() << '\n';
    std::cout << "weighted F1  " << report.at("weighted_f1").get<double>() << '\n';
    std::cout << "macro F1     " << report.at("macro_f1").get<double>() << '\n';

    if (!args.plot_path.empty())
    {
        std::ofstream plot(args.plot_path);
        plot << "class,precision,recall,f1,support\n";
        for (const auto& name : classes)
        {
            const auto& stats = report.at("per_class").at(name);
            plot << name << ',' << fmt(stats.at("precision").get<double>()) << ','
                 << fmt(stats.at("recall").get<double>()) << ','
                 << fmt(stats.at("f1").get<double>()) << ','
                 << stats.at("support").get<std::int64_t>() << '\n';
        }
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"candidefit: deformable 3D face model fitting and emotion classification"};
    app.set_version_flag("--version", CANDIDE_VERSION);
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic landmark dataset");
    synth_cmd->add_option("--model", synth_args.model_path, "model file")->required();
    synth_cmd->add_option("--corr", synth_args.corr_path, "correspondence file")->required();
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth_cmd->add_option("--n-per-class", synth_args.spec.n_per_class, "frames per class");
    synth_cmd->add_option("--seed", synth_args.spec.seed, "random seed");
    synth_cmd->add_option("--noise-sigma", synth_args.spec.noise_sigma, "landmark noise, pixels");
    synth_cmd->add_option("--train-yaw", synth_args.spec.train_yaw, "training yaw, radians");
    synth_cmd
        ->add_option("--test-yaw", synth_args.spec.test_yaws,
                     "test yaw, radians (repeatable; default -pi/4 pi/4)")
        ->expected(-1);
    synth_cmd->add_option("--resolution", synth_args.spec.resolution, "nominal image size");
    synth_cmd->add_option("--scale-lo", synth_args.spec.scale_lo, "smallest face scale");
    synth_cmd->add_option("--scale-hi", synth_args.spec.scale_hi, "largest face scale");
    synth_cmd->add_option("--shape-base-sigma", synth_args.spec.shape_base_sigma,
                          "identity draw deviation");
    synth_cmd->add_option("--shape-jitter-sigma", synth_args.spec.shape_jitter_sigma,
                          "per-frame identity jitter");
    synth_cmd->add_option("--intensity-lo", synth_args.spec.intensity_lo,
                          "recipe intensity lower bound");
    synth_cmd->add_option("--intensity-hi", synth_args.spec.intensity_hi,
                          "recipe intensity upper bound");
    synth_cmd->add_flag("--no-augment", synth_args.no_augment, "disable training augmentation");
    synth_cmd->add_flag("--quiet", synth_args.quiet, "suppress progress output");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit the model to landmark frames");
    fit_cmd->add_option("--model", fit_args.model_path, "model file")->required();
    fit_cmd->add_option("--corr", fit_args.corr_path, "correspondence file")->required();
    fit_cmd->add_option("--data", fit_args.data_path, "landmark csv")->required();
    fit_cmd->add_option("--out", fit_args.out_dir, "output directory")->required();
    fit_cmd->add_option("--mode", fit_args.mode, "global | personalize | action");
    fit_cmd->add_option("--su", fit_args.su_path, "personalization output (su.json)");
    fit_cmd->add_option("--threshold", fit_args.threshold, "distrust threshold");
    fit_cmd->add_flag("--quiet", fit_args.quiet, "suppress progress output");

    FitArgs personalize_args;
    personalize_args.mode = "personalize";
    auto* personalize_cmd =
        app.add_subcommand("personalize", "fit shape units on neutral frames (fit mode alias)");
    personalize_cmd->add_option("--model", personalize_args.model_path, "model file")->required();
    personalize_cmd->add_option("--corr", personalize_args.corr_path, "correspondence file")
        ->required();
    personalize_cmd->add_option("--data", personalize_args.data_path, "landmark csv")->required();
    personalize_cmd->add_option("--out", personalize_args.out_dir, "output directory")->required();
    personalize_cmd->add_option("--threshold", personalize_args.threshold, "distrust threshold");
    personalize_cmd->add_flag("--quiet", personalize_args.quiet, "suppress progress output");

    ExtractArgs extract_args;
    auto* extract_cmd = app.add_subcommand("extract", "build feature vectors from fits/landmarks");
    extract_cmd->add_option("--kind", extract_args.kind, "au8 | fp68");
    extract_cmd->add_option("--fits", extract_args.fits_path, "fits.jsonl (au8 only)");
    extract_cmd->add_option("--data", extract_args.data_path, "landmark csv")->required();
    extract_cmd->add_option("--out", extract_args.out_dir, "output directory")->required();
    extract_cmd->add_option("--name", extract_args.file_name, "output file name");
    extract_cmd->add_flag("--quiet", extract_args.quiet, "suppress progress output");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train an emotion classifier");
    train_cmd->add_option("--features", train_args.features_path, "feature csv")->required();
    train_cmd->add_option("--classifier", train_args.classifier, "svm-poly | mlp");
    train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();
    train_cmd->add_option("--seed", train_args.seed, "random seed");
    train_cmd->add_option("--val-frac", train_args.val_fraction, "validation fraction (mlp)");
    train_cmd->add_option("--svm-c", train_args.svm_c, "soft margin C");
    train_cmd->add_option("--svm-degree", train_args.svm_degree, "polynomial degree");
    train_cmd->add_option("--svm-gamma", train_args.svm_gamma, "kernel gamma (0: 1/dim)");
    train_cmd->add_option("--svm-coef0", train_args.svm_coef0, "kernel offset");
    train_cmd->add_option("--lr", train_args.learning_rate, "initial learning rate");
    train_cmd->add_option("--batch-size", train_args.batch_size, "batch size");
    train_cmd->add_option("--max-epochs", train_args.max_epochs, "epoch cap");
    train_cmd->add_option("--patience", train_args.patience, "plateau patience, epochs");
    train_cmd->add_flag("--quiet", train_args.quiet, "suppress progress output");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model on features");
    eval_cmd->add_option("--model-file", eval_args.model_path, "model.json")->required();
    eval_cmd->add_option("--features", eval_args.features_path, "feature csv")->required();
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();
    eval_cmd->add_flag("--plot-data", eval_args.plot_data, "emit per-class plot csv");
    eval_cmd->add_flag("--quiet", eval_args.quiet, "suppress progress output");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "print an evaluation report");
    report_cmd->add_option("--report", report_args.report_path, "report.json")->required();
    report_cmd->add_option("--plot-data", report_args.plot_path, "write per-class plot csv here");

    try
    {
        app.parse(argc, argv);
        if (synth_cmd->parsed())
            return run_synth(synth_args);
        if (fit_cmd->parsed())
            return run_fit(fit_args);
        if (personalize_cmd->parsed())
        {
            personalize_args.mode = "personalize";
            return run_fit(personalize_args);
        }
        if (extract_cmd->parsed())
            return run_extract(extract_args);
        if (train_cmd->parsed())
            return run_train(train_args);
        if (eval_cmd->parsed())
            return run_eval(eval_args);
        if (report_cmd->parsed())
            return run_report(report_args);
        return exit_usage;
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }
    catch (const UsageError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    catch (const fitting::DivergedError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric;
    }
    catch (const NumericError& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
}
