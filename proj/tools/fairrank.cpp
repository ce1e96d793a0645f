// Command-line front end: generate synthetic datasets, train ranking models,
// evaluate them, compare methods, and run the built-in case study.

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "fairrank/cli.hpp"

namespace fc = fairrank::cli;

int main(int argc, char** argv) {
  CLI::App app{"fair Top-K trial-site ranking engine"};
  app.require_subcommand(1);

  fc::GenerateArgs gen;
  bool split_given = false;
  std::vector<std::size_t> split_counts;
  auto* g = app.add_subcommand("generate", "write a synthetic dataset with planted ground truth");
  g->add_option("--out", gen.out, "output dataset path")->required();
  g->add_option("--seed", gen.gen.seed, "master seed");
  g->add_option("--n-trials", gen.gen.n_trials, "number of trials");
  g->add_option("--m", gen.gen.m, "candidate sites per trial");
  g->add_option("--l", gen.gen.l, "demographic groups");
  g->add_option("--p", gen.gen.p, "trial feature dimension");
  g->add_option("--q", gen.gen.q, "site feature dimension");
  g->add_option("--k", gen.gen.k, "Top-K recorded in the header");
  g->add_option("--feature-noise", gen.gen.feature_noise, "observation noise level");
  g->add_option("--enrollment-scale", gen.gen.enrollment_scale, "enrollment magnitude");
  g->add_option("--homogeneous-fraction", gen.gen.homogeneous_fraction,
                "share of one-group-dominant sites");
  g->add_option("--homogeneous-boost", gen.gen.homogeneous_boost,
                "enrollment affinity bonus for homogeneous sites");
  g->add_option("--latent-dim", gen.gen.latent_dim, "planted latent dimension");
  g->add_option("--split", split_counts, "train,val,test trial counts")
      ->expected(3)
      ->delimiter(',')
      ->each([&split_given](const std::string&) { split_given = true; });

  fc::TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a scorer on a dataset");
  t->add_option("--data", tr.data, "dataset path")->required();
  t->add_option("--out", tr.out, "checkpoint output path")->required();
  t->add_option("--history", tr.history, "training-history CSV path");
  t->add_option("--method", tr.method, "pg|bc|regress");
  t->add_option("--fairness", tr.fairness, "none|entropy|exposure");
  t->add_option("--policy", tr.policy, "auto|exact|proxy");
  t->add_option("--lambda", tr.cfg.lambda, "fairness weight");
  t->add_option("--eta", tr.cfg.eta, "learning rate");
  t->add_option("--k", tr.cfg.k, "Top-K size");
  t->add_option("--mc-samples", tr.cfg.n_mc, "ranking samples per trial per step");
  t->add_option("--epochs", tr.cfg.epochs, "training epochs");
  t->add_option("--batch-size", tr.cfg.batch_size, "trials per step");
  t->add_option("--seed", tr.cfg.seed, "master seed");
  t->add_option("--grad-clip", tr.cfg.grad_clip, "global-norm cap, <=0 disables");
  t->add_option("--h1", tr.cfg.h1, "first hidden layer size");
  t->add_option("--h2", tr.cfg.h2, "second hidden layer size");
  t->add_option("--val-samples", tr.cfg.n_eval_val, "validation ranking samples");
  t->add_flag_callback(
      "--no-baseline",
      [&tr] { tr.cfg.variance_baseline = fairrank::VarianceBaseline::None; },
      "disable the mean-reward variance baseline (raw estimator)");

  fc::EvaluateArgs ev;
  bool deterministic = false, raw_gains = false;
  auto* e = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset split");
  e->add_option("--data", ev.data, "dataset path")->required();
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  e->add_option("--out", ev.out, "report output prefix (.csv/.kv)")->required();
  e->add_option("--split", ev.split, "train|val|test");
  e->add_option("--group-by", ev.group_by, "trial attribute to break reports down by");
  e->add_option("--reference", ev.reference, "earlier .kv report for relative change");
  e->add_option("--k", ev.cfg.k, "Top-K size");
  e->add_option("--n-eval", ev.cfg.n_eval, "ranking samples per trial");
  e->add_option("--seed", ev.cfg.seed, "master seed");
  e->add_flag("--deterministic", deterministic, "rank by sorted score, no sampling");
  e->add_flag("--raw-gains", raw_gains, "NDCG on untransformed enrollments");

  fc::CompareArgs cp;
  auto* c = app.add_subcommand("compare", "train and evaluate several methods side by side");
  c->add_option("--data", cp.data, "dataset path")->required();
  c->add_option("--out", cp.out, "comparison table CSV path")->required();
  c->add_option("--methods", cp.methods, "pg|pg-entropy|pg-os|bc|regress")
      ->delimiter(',')
      ->required();
  c->add_option("--lambda", cp.cfg.lambda, "fairness weight");
  c->add_option("--eta", cp.cfg.eta, "learning rate");
  c->add_option("--k", cp.cfg.k, "Top-K size");
  c->add_option("--mc-samples", cp.cfg.n_mc, "ranking samples per trial per step");
  c->add_option("--epochs", cp.cfg.epochs, "training epochs");
  c->add_option("--batch-size", cp.cfg.batch_size, "trials per step");
  c->add_option("--seed", cp.cfg.seed, "master seed");
  c->add_option("--h1", cp.cfg.h1, "first hidden layer size");
  c->add_option("--h2", cp.cfg.h2, "second hidden layer size");
  c->add_option("--n-eval", cp.n_eval, "evaluation ranking samples per trial");

  fc::CaseStudyArgs cs;
  auto* y = app.add_subcommand("case-study",
                               "selection behavior of the reward variants on a tiny instance");
  y->add_option("--data", cs.data, "use the first trial of this dataset instead");
  y->add_option("--out", cs.out, "also write the report to this file");
  y->add_option("--lambda", cs.cfg.lambda, "fairness weight");
  y->add_option("--eta", cs.cfg.eta, "learning rate");
  y->add_option("--steps", cs.cfg.steps, "training steps per variant");
  y->add_option("--mc-samples", cs.cfg.n_mc, "ranking samples per step");
  y->add_option("--k", cs.cfg.k, "Top-K size");
  y->add_option("--seed", cs.cfg.seed, "master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? fc::kExitOk : fc::kExitUsage;
  }

  if (g->parsed()) {
    if (split_given) {
      gen.gen.split_train = split_counts[0];
      gen.gen.split_val = split_counts[1];
      gen.gen.split_test = split_counts[2];
    } else if (gen.gen.n_trials != 400) {
      // keep the default 70/15/15 shape when only --n-trials is given
      gen.gen.split_train = gen.gen.n_trials * 7 / 10;
      gen.gen.split_val = (gen.gen.n_trials - gen.gen.split_train) / 2;
      gen.gen.split_test = gen.gen.n_trials - gen.gen.split_train - gen.gen.split_val;
    }
    return fc::cmd_generate(gen, std::cout);
  }
  if (t->parsed()) return fc::cmd_train(tr, std::cout);
  if (e->parsed()) {
    ev.cfg.deterministic = deterministic;
    ev.cfg.raw_gains = raw_gains;
    return fc::cmd_evaluate(ev, std::cout);
  }
  if (c->parsed()) return fc::cmd_compare(cp, std::cout);
  if (y->parsed()) return fc::cmd_case_study(cs, std::cout);
  return fc::kExitUsage;
}
