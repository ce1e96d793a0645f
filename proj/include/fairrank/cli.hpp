#pragma once
// Command implementations behind the command-line tool. Every command is
// deterministic given its --seed and input files. Exit codes: 0 success,
// 1 usage error, 2 data/validation error, 3 numerical divergence.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairrank/case_study.hpp"
#include "fairrank/core.hpp"
#include "fairrank/datagen.hpp"
#include "fairrank/metrics.hpp"
#include "fairrank/scorer.hpp"
#include "fairrank/text_io.hpp"
#include "fairrank/trainer.hpp"

namespace fairrank::cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

// Flag combinations that parse but make no sense.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const UsageError& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    log << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitData;
  }
}

inline FairnessMode parse_fairness(const std::string& s) {
  if (s == "none") return FairnessMode::None;
  if (s == "entropy") return FairnessMode::Entropy;
  if (s == "exposure") return FairnessMode::OneSidedExposure;
  throw UsageError("unknown fairness mode '" + s + "' (none|entropy|exposure)");
}

inline std::optional<PolicyMode> parse_policy(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "exact") return PolicyMode{PolicyKind::ExactPL};
  if (s == "proxy") return PolicyMode{PolicyKind::TopKProxy};
  throw UsageError("unknown policy mode '" + s + "' (auto|exact|proxy)");
}

// --- generate ----------------------------------------------------------------

struct GenerateArgs {
  GenConfig gen;
  std::string out;
};

inline int cmd_generate(const GenerateArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.out.empty()) throw UsageError("generate: --out is required");
    const Dataset ds = generate(args.gen);
    save(ds, args.out);
    log << "wrote " << args.out << ": n_trials=" << ds.header.n_trials
        << " m=" << ds.header.m << " l=" << ds.header.l << " p=" << ds.header.p
        << " q=" << ds.header.q << " splits=" << ds.header.split_train << "/"
        << ds.header.split_val << "/" << ds.header.split_test << "\n";
  });
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;      // checkpoint path
  std::string history;  // optional history CSV path
  std::string method = "pg";      // pg | bc | regress
  std::string fairness = "none";  // none | entropy | exposure
  std::string policy = "auto";    // auto | exact | proxy
  TrainConfig cfg;
};

inline int cmd_train(const TrainArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.data.empty()) throw UsageError("train: --data is required");
    if (args.out.empty()) throw UsageError("train: --out is required");
    const Dataset ds = load(args.data);
    TrainConfig cfg = args.cfg;
    cfg.fairness_mode = parse_fairness(args.fairness);
    cfg.policy_mode = parse_policy(args.policy);
    std::pair<MlpParams, TrainHistory> result;
    if (args.method == "pg") {
      result = train(ds, cfg);
    } else if (args.method == "bc") {
      result = train_bc(ds, cfg);
    } else if (args.method == "regress") {
      result = train_regress(ds, cfg);
    } else {
      throw UsageError("unknown method '" + args.method + "' (pg|bc|regress)");
    }
    save_checkpoint(result.first, args.out);
    if (!args.history.empty()) save_history_csv(result.second, args.history);
    log << "trained " << args.method << " for " << result.second.epochs.size()
        << " epochs; checkpoint " << args.out;
    if (!result.second.epochs.empty()) {
      const auto& last = result.second.epochs.back();
      log << " (last epoch combined reward " << format_double(last.combined) << ")";
    }
    log << "\n";
  });
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string data;
  std::string checkpoint;
  std::string out;        // output prefix; writes <out>.csv and <out>.kv
  std::string split = "test";
  std::string group_by;   // optional trial attribute key
  std::string reference;  // optional earlier .kv report for relative change
  EvalConfig cfg;
};

inline void log_report_line(const EvalReport& r, std::ostream& log) {
  log << "  " << r.label << ": n=" << r.n_trials << " rel_err="
      << format_double(r.relative_error) << " recall=" << format_double(r.recall)
      << " ndcg=" << format_double(r.ndcg) << " entropy=" << format_double(r.entropy)
      << "\n";
}

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.data.empty()) throw UsageError("evaluate: --data is required");
    if (args.checkpoint.empty()) throw UsageError("evaluate: --checkpoint is required");
    if (args.out.empty()) throw UsageError("evaluate: --out is required");
    const Dataset ds = load(args.data);
    const MlpParams params = load_checkpoint(args.checkpoint);
    if (params.p != ds.header.p || params.q != ds.header.q) {
      throw ValidationError("checkpoint feature dims (p=" + std::to_string(params.p) +
                            ", q=" + std::to_string(params.q) +
                            ") do not match dataset (p=" + std::to_string(ds.header.p) +
                            ", q=" + std::to_string(ds.header.q) + ")");
    }
    const Split split = parse_split(args.split, "evaluate");
    std::vector<EvalReport> reports;
    if (args.group_by.empty()) {
      reports.push_back(evaluate(params, ds, split, args.cfg));
    } else {
      reports = evaluate_grouped(params, ds, split, args.group_by, args.cfg);
    }
    if (!args.reference.empty()) {
      const GroupDistribution ref = load_report_representation(args.reference);
      for (auto& r : reports) {
        r.rel_change = relative_change(r.group_representation, ref);
      }
    }
    save_reports_csv(reports, args.out + ".csv");
    if (args.group_by.empty()) save_report_kv(reports.front(), args.out + ".kv");
    log << "evaluated " << args.split << " split of " << args.data << ":\n";
    for (const auto& r : reports) log_report_line(r, log);
  });
}

// --- compare -----------------------------------------------------------------

struct CompareArgs {
  std::string data;
  std::string out;  // comparison table CSV
  std::vector<std::string> methods;  // pg | pg-entropy | pg-os | bc | regress
  TrainConfig cfg;                   // shared hyperparameters (lambda, eta, ...)
  std::size_t n_eval = 20;
};

// Trains and evaluates each method spec on the same dataset and emits one
// table row per method: method, rel_err, recall, ndcg, entropy.
inline int cmd_compare(const CompareArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    if (args.data.empty()) throw UsageError("compare: --data is required");
    if (args.out.empty()) throw UsageError("compare: --out is required");
    if (args.methods.size() < 2) {
      throw UsageError("compare: need at least two method specs");
    }
    const Dataset ds = load(args.data);
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot open comparison table for writing: " + args.out);
    out << "method,rel_err,recall,ndcg,entropy\n";
    log << "method           rel_err  recall   ndcg     entropy\n";
    for (const auto& name : args.methods) {
      TrainConfig cfg = args.cfg;
      bool deterministic_eval = false;
      std::pair<MlpParams, TrainHistory> trained;
      if (name == "pg") {
        cfg.fairness_mode = FairnessMode::None;
        trained = train(ds, cfg);
      } else if (name == "pg-entropy") {
        cfg.fairness_mode = FairnessMode::Entropy;
        trained = train(ds, cfg);
      } else if (name == "pg-os") {
        cfg.fairness_mode = FairnessMode::OneSidedExposure;
        trained = train(ds, cfg);
      } else if (name == "bc") {
        trained = train_bc(ds, cfg);
        deterministic_eval = true;
      } else if (name == "regress") {
        trained = train_regress(ds, cfg);
        deterministic_eval = true;
      } else {
        throw UsageError("unknown method spec '" + name +
                         "' (pg|pg-entropy|pg-os|bc|regress)");
      }
      EvalConfig ecfg;
      ecfg.k = cfg.k;
      ecfg.n_eval = args.n_eval;
      ecfg.seed = derive_seed(cfg.seed, "compare-eval");
      ecfg.deterministic = deterministic_eval;
      ecfg.threads = cfg.threads;
      const EvalReport rep = evaluate(trained.first, ds, Split::Test, ecfg);
      out << name << ',' << format_double(rep.relative_error) << ','
          << format_double(rep.recall) << ',' << format_double(rep.ndcg) << ','
          << format_double(rep.entropy) << "\n";
      log << std::left << std::setw(16) << name << ' ' << std::setw(8)
          << std::setprecision(4) << rep.relative_error << ' ' << std::setw(8)
          << rep.recall << ' ' << std::setw(8) << rep.ndcg << ' ' << std::setw(8)
          << rep.entropy << "\n";
    }
    if (!out) throw IoError("failed writing comparison table: " + args.out);
  });
}

// --- case-study ----------------------------------------------------------------

struct CaseStudyArgs {
  std::string data;  // optional: use the first trial of this dataset instead
  std::string out;   // optional report file
  CaseStudyConfig cfg;
};

inline int cmd_case_study(const CaseStudyArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    CandidateSet instance;
    if (args.data.empty()) {
      instance = builtin_case_instance();
    } else {
      const Dataset ds = load(args.data);
      if (ds.trials.empty()) throw ValidationError("case-study: dataset has no trials");
      instance = ds.trials.front();
    }
    const CaseStudyResult result = run_case_study(instance, args.cfg);
    write_case_study(result, log);
    if (!args.out.empty()) {
      std::ofstream f(args.out);
      if (!f) throw IoError("cannot open case-study report for writing: " + args.out);
      write_case_study(result, f);
      if (!f) throw IoError("failed writing case-study report: " + args.out);
    }
  });
}

}  // namespace fairrank::cli
