// Black-box tests of the `bite` command-line binary: exit codes, artifact
// schemas, determinism, and cross-command consistency. The binary path is
// injected at compile time (BITE_CLI_PATH); commands run through std::system
// with stdout/stderr captured to files.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"

#include "bite/data.hpp"
#include "bite/training.hpp"
#include "bite/verify.hpp"

using namespace bite;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

std::string cli_path() { return BITE_CLI_PATH; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path(::testing::TempDir()) / ("cli-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_file = scratch / "stdout.txt";
    const fs::path err_file = scratch / "stderr.txt";
    const std::string cmd = "'" + cli_path() + "' " + args + " > '" + out_file.string() +
                            "' 2> '" + err_file.string() + "'";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = detail::slurp(out_file.string());
    r.err = detail::slurp(err_file.string());
    return r;
}

json load_json(const fs::path& path) { return json::parse(detail::slurp(path.string())); }

// ---------------------------------------------------------------------------
// Minimal JSON-schema checker covering the vocabulary the shipped schemas
// use: type, properties, required, additionalProperties:false, items, enum,
// minimum, maximum, and $ref into #/definitions.
// ---------------------------------------------------------------------------

class SchemaChecker {
public:
    explicit SchemaChecker(json schema) : root_(std::move(schema)) {}

    std::vector<std::string> validate(const json& value) {
        errors_.clear();
        check(root_, value, "$");
        return errors_;
    }

private:
    json root_;
    std::vector<std::string> errors_;

    const json& resolve(const json& schema) {
        if (schema.contains("$ref")) {
            const std::string ref = schema.at("$ref").get<std::string>();
            const std::string prefix = "#/definitions/";
            if (ref.rfind(prefix, 0) != 0) {
                throw std::runtime_error("unsupported $ref: " + ref);
            }
            return root_.at("definitions").at(ref.substr(prefix.size()));
        }
        return schema;
    }

    static bool type_matches(const std::string& t, const json& v) {
        if (t == "object") return v.is_object();
        if (t == "array") return v.is_array();
        if (t == "string") return v.is_string();
        if (t == "boolean") return v.is_boolean();
        if (t == "integer") return v.is_number_integer() || v.is_number_unsigned();
        if (t == "number") return v.is_number();
        if (t == "null") return v.is_null();
        return false;
    }

    void check(const json& schema_in, const json& v, const std::string& path) {
        const json& schema = resolve(schema_in);
        if (schema.contains("type") &&
            !type_matches(schema.at("type").get<std::string>(), v)) {
            errors_.push_back(path + ": expected " + schema.at("type").get<std::string>());
            return;
        }
        if (schema.contains("enum")) {
            bool found = false;
            for (const json& option : schema.at("enum")) found = found || option == v;
            if (!found) errors_.push_back(path + ": value not in enum");
        }
        if (v.is_number()) {
            const double x = v.get<double>();
            if (schema.contains("minimum") && x < schema.at("minimum").get<double>()) {
                errors_.push_back(path + ": below minimum");
            }
            if (schema.contains("maximum") && x > schema.at("maximum").get<double>()) {
                errors_.push_back(path + ": above maximum");
            }
        }
        if (v.is_object()) {
            if (schema.contains("required")) {
                for (const json& key : schema.at("required")) {
                    if (!v.contains(key.get<std::string>())) {
                        errors_.push_back(path + ": missing required property '" +
                                          key.get<std::string>() + "'");
                    }
                }
            }
            const json* props =
                schema.contains("properties") ? &schema.at("properties") : nullptr;
            const bool sealed = schema.contains("additionalProperties") &&
                                schema.at("additionalProperties").is_boolean() &&
                                !schema.at("additionalProperties").get<bool>();
            for (const auto& item : v.items()) {
                if (props != nullptr && props->contains(item.key())) {
                    check(props->at(item.key()), item.value(), path + "." + item.key());
                } else if (sealed) {
                    errors_.push_back(path + ": unexpected property '" + item.key() + "'");
                }
            }
        }
        if (v.is_array() && schema.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                check(schema.at("items"), v[i], path + "[" + std::to_string(i) + "]");
            }
        }
    }
};

void expect_schema_valid(const fs::path& schema_file, const json& value) {
    SchemaChecker checker(load_json(schema_file));
    const std::vector<std::string> errors = checker.validate(value);
    for (const std::string& e : errors) ADD_FAILURE() << schema_file.filename() << ": " << e;
}

fs::path schema_dir() {
    return fs::path(BITE_SOURCE_DIR) / "docs" / "schemas";
}

// ---------------------------------------------------------------------------
// Fixture data: a small four-class oscillatory set that trains in seconds.
// ---------------------------------------------------------------------------

TrialSet small_set(Index subjects = 2, Index per_class = 6) {
    return synth_ssvep(subjects, per_class, {8.0, 12.0, 16.0, 20.0}, 256.0, 128, 10.0, 424242,
                       4);
}

ordered_json base_config(const std::string& data_path) {
    ordered_json model;
    model["f1"] = 4;
    model["depth-mult"] = 2;
    model["stft-window"] = 32;
    model["f-lo"] = 8;
    model["f-hi"] = 64;
    model["pool"] = 8;
    model["tcn-blocks"] = 1;
    model["tcn-kernel"] = 3;
    model["dropout"] = 0.1;
    ordered_json train;
    train["epochs"] = 3;
    train["batch-size"] = 16;
    train["learning-rate"] = 0.002;
    train["seed"] = 11;
    train["split-ratio"] = 0.75;
    ordered_json cfg;
    cfg["model"] = std::move(model);
    cfg["train"] = std::move(train);
    cfg["data"]["path"] = data_path;
    cfg["protocol"] = "within-subject";
    return cfg;
}

fs::path write_config(const fs::path& dir, const ordered_json& cfg) {
    const fs::path path = dir / "config.json";
    std::ofstream out(path);
    out << cfg.dump(2) << '\n';
    return path;
}

fs::path write_small_set(const fs::path& dir, const TrialSet& set) {
    const fs::path path = dir / "data.bite1";
    write_trials(path.string(), set);
    return path;
}

// ---------------------------------------------------------------------------
// Exit codes and argument handling
// ---------------------------------------------------------------------------

TEST(CliExitCodes, HelpExitsZero) {
    const fs::path dir = fresh_dir("help");
    const RunResult r = run_cli("--help", dir);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("train"), std::string::npos);
    EXPECT_NE(r.out.find("verify"), std::string::npos);
}

TEST(CliExitCodes, MissingSubcommandIsUsageError) {
    const fs::path dir = fresh_dir("nosub");
    const RunResult r = run_cli("", dir);
    EXPECT_EQ(r.exit_code, 2);
}

TEST(CliExitCodes, MalformedJsonConfigIsConfigError) {
    const fs::path dir = fresh_dir("badjson");
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << "{ not json";
    const RunResult r =
        run_cli("train --config '" + cfg.string() + "' --out '" + (dir / "out").string() + "'",
                dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("invalid JSON"), std::string::npos);
}

TEST(CliExitCodes, UnknownConfigKeysAreNamedByPath) {
    const fs::path dir = fresh_dir("unknownkey");
    ordered_json cfg = base_config("unused.bite1");
    cfg["train"]["lr"] = 0.001; // misspelled key must be rejected, not ignored
    const fs::path cfg_path = write_config(dir, cfg);
    const RunResult r = run_cli(
        "train --config '" + cfg_path.string() + "' --out '" + (dir / "out").string() + "'",
        dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("train.lr"), std::string::npos);
}

TEST(CliExitCodes, MissingDataFileIsDataError) {
    const fs::path dir = fresh_dir("missingdata");
    const fs::path cfg_path = write_config(dir, base_config((dir / "absent.bite1").string()));
    const RunResult r = run_cli(
        "train --config '" + cfg_path.string() + "' --out '" + (dir / "out").string() + "'",
        dir);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("absent.bite1"), std::string::npos);
}

TEST(CliExitCodes, NyquistViolatingSynthIsConfigError) {
    const fs::path dir = fresh_dir("nyquist");
    const RunResult r = run_cli(
        "synth --kind ssvep --out '" + (dir / "x.bite1").string() + "' --fs 100 --freqs 8,60",
        dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_FALSE(fs::exists(dir / "x.bite1"));
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

TEST(CliSynth, WritesTrialsTheLibraryCanReadBack) {
    const fs::path dir = fresh_dir("synth");
    const fs::path out = dir / "mi.bite1";
    const RunResult r = run_cli("synth --kind mi --out '" + out.string() +
                                    "' --subjects 3 --trials-per-class 4 --classes 2 "
                                    "--channels 4 --samples 64 --fs 128 --seed 99",
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const TrialSet set = read_trials(out.string());
    EXPECT_EQ(set.trials.size(), 3u * 4u * 2u);
    EXPECT_EQ(set.n_classes, 2);
    EXPECT_EQ(set.channels(), 4);
    EXPECT_EQ(set.samples(), 64);
    EXPECT_EQ(set.fs, 128.0);
}

TEST(CliSynth, SameSeedWritesIdenticalFiles) {
    const fs::path dir = fresh_dir("synthseed");
    const std::string flags = " --subjects 2 --trials-per-class 3 --seed 31";
    ASSERT_EQ(run_cli("synth --kind ssvep --out '" + (dir / "a.bite1").string() + "'" + flags,
                      dir)
                  .exit_code,
              0);
    ASSERT_EQ(run_cli("synth --kind ssvep --out '" + (dir / "b.bite1").string() + "'" + flags,
                      dir)
                  .exit_code,
              0);
    EXPECT_EQ(detail::slurp((dir / "a.bite1").string()),
              detail::slurp((dir / "b.bite1").string()));
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

TEST(CliTrain, ReportConformsToSchemaAndLogsEpochs) {
    const fs::path dir = fresh_dir("train");
    const fs::path data = write_small_set(dir, small_set());
    const ordered_json cfg = base_config(data.string());
    expect_schema_valid(schema_dir() / "run-config.schema.json", json::parse(cfg.dump()));
    const fs::path cfg_path = write_config(dir, cfg);

    const RunResult r = run_cli(
        "train --config '" + cfg_path.string() + "' --out '" + (dir / "out").string() + "'",
        dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json report = load_json(dir / "out" / "report.json");
    expect_schema_valid(schema_dir() / "report.schema.json", report);
    EXPECT_EQ(report.at("seed").get<std::uint64_t>(), 11u);
    EXPECT_EQ(report.at("protocol").get<std::string>(), "within-subject");
    EXPECT_EQ(report.at("per_subject").size(), 2u);
    EXPECT_TRUE(fs::exists(dir / "out" / "weights-0.bitw"));
    EXPECT_TRUE(fs::exists(dir / "out" / "weights-1.bitw"));

    // Per-epoch progress goes to stdout: epochs x folds lines.
    const std::regex line("epoch=[0-9]+ fold=[0-9]+ loss=[-+0-9.einf]+ acc=[0-9.]+");
    auto begin = std::sregex_iterator(r.out.begin(), r.out.end(), line);
    EXPECT_EQ(std::distance(begin, std::sregex_iterator()), 3 * 2);
    EXPECT_NE(r.out.find("epoch=1 fold=0 "), std::string::npos);
}

TEST(CliTrain, SeedFlagOverridesConfigAndRunsAreByteIdentical) {
    const fs::path dir = fresh_dir("trainseed");
    const fs::path data = write_small_set(dir, small_set());
    const fs::path cfg_path = write_config(dir, base_config(data.string()));

    const std::string base = "train --config '" + cfg_path.string() + "' --seed 2025 --out '";
    const RunResult a = run_cli(base + (dir / "a").string() + "'", dir);
    const std::string out_a = a.out;
    ASSERT_EQ(a.exit_code, 0) << a.err;
    const RunResult b = run_cli(base + (dir / "b").string() + "'", dir);
    ASSERT_EQ(b.exit_code, 0) << b.err;

    EXPECT_EQ(out_a, b.out) << "per-epoch logs must be reproducible";
    EXPECT_EQ(detail::slurp((dir / "a" / "report.json").string()),
              detail::slurp((dir / "b" / "report.json").string()));
    for (int fold = 0; fold < 2; ++fold) {
        const std::string name = "weights-" + std::to_string(fold) + ".bitw";
        EXPECT_EQ(detail::slurp((dir / "a" / name).string()),
                  detail::slurp((dir / "b" / name).string()))
            << name;
    }
    const json report = load_json(dir / "a" / "report.json");
    EXPECT_EQ(report.at("seed").get<std::uint64_t>(), 2025u);
    EXPECT_EQ(report.at("config_echo").at("train").at("seed").get<std::uint64_t>(), 2025u);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

TEST(CliEval, ReproducesWithinSubjectFoldMetrics) {
    const fs::path dir = fresh_dir("evalws");
    const TrialSet set = small_set();
    const fs::path data = write_small_set(dir, set);
    const fs::path cfg_path = write_config(dir, base_config(data.string()));
    ASSERT_EQ(run_cli("train --config '" + cfg_path.string() + "' --out '" +
                          (dir / "out").string() + "'",
                      dir)
                  .exit_code,
              0);
    const json report = load_json(dir / "out" / "report.json");

    // Rebuild fold 0's test partition with the library and evaluate the
    // stored weights on it: the metrics must match the report exactly.
    const std::vector<Fold> folds = split_within_subject(set, 0.75, 11);
    TrialSet test_part;
    test_part.fs = set.fs;
    test_part.n_classes = set.n_classes;
    for (std::size_t i : folds[0].test) test_part.trials.push_back(set.trials[i]);
    const fs::path test_file = dir / "fold0-test.bite1";
    write_trials(test_file.string(), test_part);

    const RunResult r = run_cli("eval --weights '" + (dir / "out" / "weights-0.bitw").string() +
                                    "' --data '" + test_file.string() + "'",
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json eval_report = json::parse(r.out);
    expect_schema_valid(schema_dir() / "eval-report.schema.json", eval_report);

    const json& subject0 = report.at("per_subject").at(0);
    EXPECT_DOUBLE_EQ(eval_report.at("accuracy").get<double>(),
                     subject0.at("accuracy").get<double>());
    EXPECT_DOUBLE_EQ(eval_report.at("kappa").get<double>(), subject0.at("kappa").get<double>());
}

TEST(CliEval, ReproducesLosoFoldMetricsByRefittingAlignment) {
    const fs::path dir = fresh_dir("evalloso");
    const TrialSet set = small_set();
    const fs::path data = write_small_set(dir, set);
    ordered_json cfg = base_config(data.string());
    cfg["protocol"] = "loso";
    cfg["train"]["epochs"] = 2;
    const fs::path cfg_path = write_config(dir, cfg);
    ASSERT_EQ(run_cli("train --config '" + cfg_path.string() + "' --out '" +
                          (dir / "out").string() + "'",
                      dir)
                  .exit_code,
              0);
    const json report = load_json(dir / "out" / "report.json");

    const std::vector<Fold> folds = split_loso(set);
    TrialSet held_out;
    held_out.fs = set.fs;
    held_out.n_classes = set.n_classes;
    for (std::size_t i : folds[0].test) held_out.trials.push_back(set.trials[i]);
    const fs::path test_file = dir / "subject0.bite1";
    write_trials(test_file.string(), held_out);

    const RunResult r = run_cli("eval --weights '" + (dir / "out" / "weights-0.bitw").string() +
                                    "' --data '" + test_file.string() + "'",
                                dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json eval_report = json::parse(r.out);
    const json& subject0 = report.at("per_subject").at(0);
    EXPECT_DOUBLE_EQ(eval_report.at("accuracy").get<double>(),
                     subject0.at("accuracy").get<double>());
    EXPECT_DOUBLE_EQ(eval_report.at("kappa").get<double>(), subject0.at("kappa").get<double>());
}

TEST(CliEval, RejectsMismatchedChannelCount) {
    const fs::path dir = fresh_dir("evalmismatch");
    const fs::path data = write_small_set(dir, small_set());
    const fs::path cfg_path = write_config(dir, base_config(data.string()));
    ASSERT_EQ(run_cli("train --config '" + cfg_path.string() + "' --out '" +
                          (dir / "out").string() + "'",
                      dir)
                  .exit_code,
              0);

    TrialSet wide = synth_ssvep(1, 3, {8.0, 12.0, 16.0, 20.0}, 256.0, 128, 10.0, 7, 6);
    const fs::path wide_file = dir / "wide.bite1";
    write_trials(wide_file.string(), wide);
    const RunResult r = run_cli("eval --weights '" + (dir / "out" / "weights-0.bitw").string() +
                                    "' --data '" + wide_file.string() + "'",
                                dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("eval"), std::string::npos);
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

TEST(CliAblate, WritesAllSixCombosAndFullModelMatchesTrain) {
    const fs::path dir = fresh_dir("ablate");
    const fs::path data = write_small_set(dir, small_set());
    ordered_json cfg = base_config(data.string());
    cfg["train"]["epochs"] = 2;
    const fs::path cfg_path = write_config(dir, cfg);

    ASSERT_EQ(run_cli("ablate --config '" + cfg_path.string() + "' --out '" +
                          (dir / "abl").string() + "'",
                      dir)
                  .exit_code,
              0);
    const json table = load_json(dir / "abl" / "ablation.json");
    expect_schema_valid(schema_dir() / "ablation.schema.json", table);
    ASSERT_EQ(table.at("results").size(), 6u);
    for (const char* label : {"TB", "FB", "TF", "TFA", "TFB", "TFBA"}) {
        EXPECT_TRUE(table.at("results").contains(label)) << label;
    }

    ASSERT_EQ(run_cli("train --config '" + cfg_path.string() + "' --out '" +
                          (dir / "out").string() + "'",
                      dir)
                  .exit_code,
              0);
    const json report = load_json(dir / "out" / "report.json");
    EXPECT_DOUBLE_EQ(table.at("results").at("TFBA").at("accuracy").get<double>(),
                     report.at("accuracy").get<double>());
    EXPECT_DOUBLE_EQ(table.at("results").at("TFBA").at("kappa").get<double>(),
                     report.at("kappa").get<double>());
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

TEST(CliSweep, SingleCellMatchesTrainAndRowAveragesAreRowMeans) {
    const fs::path dir = fresh_dir("sweep");
    const fs::path data = write_small_set(dir, small_set());
    ordered_json cfg = base_config(data.string());
    cfg["train"]["epochs"] = 2;
    const fs::path cfg_path = write_config(dir, cfg);

    ASSERT_EQ(run_cli("sweep --config '" + cfg_path.string() + "' --out '" +
                          (dir / "sw").string() + "' --kernels 3,6 --dropouts 0.1",
                      dir)
                  .exit_code,
              0);
    const json sweep = load_json(dir / "sw" / "sweep.json");
    expect_schema_valid(schema_dir() / "sweep.schema.json", sweep);
    ASSERT_EQ(sweep.at("kernels").size(), 2u);
    ASSERT_EQ(sweep.at("dropouts").size(), 1u);

    for (std::size_t k = 0; k < 2; ++k) {
        double mean = 0.0;
        const json& row = sweep.at("accuracy").at(k);
        for (const json& v : row) mean += v.get<double>();
        mean /= static_cast<double>(row.size());
        EXPECT_NEAR(sweep.at("row_average").at(k).get<double>(), mean, 1e-12);
    }

    // The (kernel=3, dropout=0.1) cell ran with exactly the base model
    // config, so a direct train run must land on the same numbers.
    ASSERT_EQ(run_cli("train --config '" + cfg_path.string() + "' --out '" +
                          (dir / "out").string() + "'",
                      dir)
                  .exit_code,
              0);
    const json report = load_json(dir / "out" / "report.json");
    EXPECT_DOUBLE_EQ(sweep.at("accuracy").at(0).at(0).get<double>(),
                     report.at("accuracy").get<double>());
}

TEST(CliSweep, InvalidKernelIsConfigError) {
    const fs::path dir = fresh_dir("sweepbad");
    const fs::path data = write_small_set(dir, small_set(1, 3));
    const fs::path cfg_path = write_config(dir, base_config(data.string()));
    const RunResult r = run_cli("sweep --config '" + cfg_path.string() + "' --out '" +
                                    (dir / "sw").string() + "' --kernels 0 --dropouts 0.1",
                                dir);
    EXPECT_EQ(r.exit_code, 2);
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

TEST(CliVerify, AllChecksPassWithExitZero) {
    const fs::path dir = fresh_dir("verify");
    const RunResult r = run_cli("verify", dir);
    EXPECT_EQ(r.exit_code, 0) << r.out << r.err;

    std::vector<std::string> lines;
    std::istringstream in(r.out);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    ASSERT_EQ(lines.size(), 6u);
    const std::regex form("check=[a-z-]+ status=(pass|fail) metric=[-+0-9.einf]+");
    const std::vector<std::string> expected_names = {"gradient-check", "stft-oracle",
                                                     "ea-identity",    "causality",
                                                     "receptive-field", "kappa-form"};
    for (std::size_t i = 0; i < lines.size(); ++i) {
        EXPECT_TRUE(std::regex_match(lines[i], form)) << lines[i];
        EXPECT_NE(lines[i].find("check=" + expected_names[i] + " "), std::string::npos)
            << lines[i];
        EXPECT_NE(lines[i].find("status=pass"), std::string::npos) << lines[i];
    }
}

TEST(CliVerify, InjectedFaultFailsWithExitOne) {
    const fs::path dir = fresh_dir("verifyfault");
    const RunResult r = run_cli("verify --inject-fault", dir);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.out.find("check=gradient-check status=fail"), std::string::npos) << r.out;
}

TEST(VerifyLibrary, BatteryPassesDirectly) {
    const std::vector<VerifyCheck> checks = run_verification();
    EXPECT_TRUE(verification_passed(checks));
    ASSERT_EQ(checks.size(), 6u);
    for (const VerifyCheck& c : checks) EXPECT_TRUE(c.pass) << c.name;
}

TEST(VerifyLibrary, InjectedFaultFlipsOnlyTheGradientCheck) {
    VerifyOptions opt;
    opt.inject_gradient_fault = true;
    const std::vector<VerifyCheck> checks = run_verification(opt);
    EXPECT_FALSE(verification_passed(checks));
    EXPECT_FALSE(checks[0].pass);
    for (std::size_t i = 1; i < checks.size(); ++i) EXPECT_TRUE(checks[i].pass) << checks[i].name;
}

// ---------------------------------------------------------------------------
// The schema checker itself has to catch violations, or the conformance
// tests above prove nothing.
// ---------------------------------------------------------------------------

TEST(SchemaChecker, FlagsMissingRequiredUnknownKeysAndBadTypes) {
    SchemaChecker checker(json::parse(R"({
        "type": "object",
        "additionalProperties": false,
        "required": ["a", "b"],
        "properties": {
            "a": {"type": "number", "minimum": 0},
            "b": {"type": "string", "enum": ["x", "y"]},
            "c": {"type": "array", "items": {"type": "integer"}}
        }
    })"));
    EXPECT_TRUE(checker.validate(json::parse(R"({"a": 1, "b": "x", "c": [1, 2]})")).empty());
    EXPECT_FALSE(checker.validate(json::parse(R"({"a": 1})")).empty()) << "missing required";
    EXPECT_FALSE(checker.validate(json::parse(R"({"a": 1, "b": "x", "z": 0})")).empty())
        << "unknown key";
    EXPECT_FALSE(checker.validate(json::parse(R"({"a": -1, "b": "x"})")).empty()) << "minimum";
    EXPECT_FALSE(checker.validate(json::parse(R"({"a": 1, "b": "q"})")).empty()) << "enum";
    EXPECT_FALSE(checker.validate(json::parse(R"({"a": 1, "b": "x", "c": [1.5]})")).empty())
        << "item type";
}

} // namespace
