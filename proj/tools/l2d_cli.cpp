// Command-line front end for the demonstration selection engine.
//
// Exit codes: 0 success, 1 configuration or input error, 2 provider/runtime
// failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l2d/l2d.hpp"

namespace {

struct CliOptions {
  std::string method = "topk_l2d";
  double alpha = 0.5;
  std::size_t k = 30;
  std::size_t n_shot = 8;
  std::string order = "score_ascending_best_last";

  std::string pool, test, labels, test_labels;
  std::vector<std::string> align;

  std::string pool_emb, test_emb, emb_endpoint;
  std::string dist_kind;  // empty: file when paths are given, else none
  std::string pool_dist, test_dist, dist_endpoint;
  std::string oracle_mode = "faithful";

  std::string template_ref = "sentiment";
  std::string completion = "mock_majority";
  std::string completion_endpoint;
  int max_tokens = 16;

  std::string perturb = "none";
  bool shuffle_symbols = false;
  std::uint64_t seed = 42;
  std::size_t parallelism = 8;
  std::string report_dir;

  int timeout_ms = 10000;
  int max_retries = 3;
  std::size_t max_in_flight = 8;
};

l2d::ProviderConfig remote_provider(const CliOptions& o, const std::string& endpoint) {
  l2d::ProviderConfig p;
  p.kind = l2d::ProviderKind::remote;
  p.endpoint = endpoint;
  p.timeout_ms = o.timeout_ms;
  p.max_retries = o.max_retries;
  p.max_in_flight = o.max_in_flight;
  return p;
}

l2d::RunConfig build_config(const CliOptions& o) {
  l2d::RunConfig c;
  c.method = l2d::parse_method(o.method);
  c.selection.alpha = o.alpha;
  c.selection.k_candidates = o.k;
  c.selection.n_shot = o.n_shot;
  try {
    c.selection.order_policy = l2d::parse_order_policy(o.order);
  } catch (const l2d::InvalidArgument& e) {
    throw l2d::ConfigError(e.what());
  }
  c.pool_corpus = o.pool;
  c.test_corpus = o.test.empty() ? o.pool : o.test;
  c.label_map = o.labels;
  c.test_label_map = o.test_labels;
  for (const auto& a : o.align) {
    const auto colon = a.find(':');
    if (colon == std::string::npos) throw l2d::ConfigError("--align expects POOL_CLASS:TEST_CLASS");
    c.ood_alignment.emplace_back(a.substr(0, colon), a.substr(colon + 1));
  }

  if (!o.emb_endpoint.empty()) {
    c.pool_embeddings = c.test_embeddings = remote_provider(o, o.emb_endpoint);
  } else {
    c.pool_embeddings.kind = c.test_embeddings.kind = l2d::ProviderKind::file;
    c.pool_embeddings.path = o.pool_emb;
    c.test_embeddings.path = o.test_emb.empty() ? o.pool_emb : o.test_emb;
    if (o.pool_emb.empty()) throw l2d::ConfigError("--pool-emb or --emb-endpoint is required");
  }

  std::string kind = o.dist_kind;
  if (kind.empty()) kind = o.pool_dist.empty() ? "none" : "file";
  if (kind != "none") {
    l2d::ProviderConfig p;
    try {
      p.kind = l2d::parse_provider_kind(kind);
      p.oracle_mode = l2d::parse_oracle_mode(o.oracle_mode);
    } catch (const l2d::InvalidArgument& e) {
      throw l2d::ConfigError(e.what());
    }
    if (p.kind == l2d::ProviderKind::remote) p = remote_provider(o, o.dist_endpoint);
    l2d::ProviderConfig pool = p;
    l2d::ProviderConfig test = p;
    if (p.kind == l2d::ProviderKind::file) {
      if (o.pool_dist.empty() || o.test_dist.empty()) {
        throw l2d::ConfigError("--pool-dist and --test-dist are required for file distributions");
      }
      pool.path = o.pool_dist;
      test.path = o.test_dist;
    }
    c.pool_distributions = pool;
    c.test_distributions = test;
  }

  c.template_ref = o.template_ref;
  c.completion = l2d::parse_completion_kind(o.completion);
  if (c.completion == l2d::CompletionKind::remote) {
    c.completion_remote = remote_provider(o, o.completion_endpoint);
  }
  c.max_tokens = o.max_tokens;
  c.perturbation = l2d::parse_perturbation(o.perturb);
  c.shuffle_symbols = o.shuffle_symbols;
  c.seed = o.seed;
  c.parallelism = o.parallelism;
  c.report_dir = o.report_dir;
  return c;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw l2d::ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<double> read_numbers_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw l2d::ConfigError("cannot open " + path);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw l2d::ConfigError(path + ": expected one number per line");
  return out;
}

void print_summary(const std::string& label, const l2d::RunReport& r) {
  std::printf("%-16s accuracy=%.4f correct=%zu total=%zu abstain=%zu\n", label.c_str(), r.accuracy,
              r.n_correct, r.n_total, r.n_abstain);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TopK + label distribution divergence demonstration selection"};
  app.set_config("--config", "", "Key-value configuration file (flags override it)");
  app.fallthrough();
  app.require_subcommand(1);

  CliOptions o;
  auto* g = &app;
  g->add_option("--method", o.method, "random | topk | topk_l2d | wo_sem | wo_l2d")->capture_default_str();
  g->add_option("--alpha", o.alpha, "Hybrid weight on semantic similarity")->capture_default_str();
  g->add_option("--k", o.k, "TopK candidates retrieved per test input")->capture_default_str();
  g->add_option("--n-shot", o.n_shot, "Demonstrations per prompt")->capture_default_str();
  g->add_option("--order", o.order, "score_descending | score_ascending_best_last")->capture_default_str();
  g->add_option("--pool", o.pool, "Pool corpus (JSON lines)");
  g->add_option("--test", o.test, "Test corpus (JSON lines); defaults to the pool corpus");
  g->add_option("--labels", o.labels, "Label map file");
  g->add_option("--test-labels", o.test_labels, "Label map of the test corpus when it differs (OOD)");
  g->add_option("--align", o.align, "OOD class alignment POOL_CLASS:TEST_CLASS (repeatable)");
  g->add_option("--pool-emb", o.pool_emb, "Pool embeddings file");
  g->add_option("--test-emb", o.test_emb, "Test embeddings file; defaults to --pool-emb");
  g->add_option("--emb-endpoint", o.emb_endpoint, "Remote /embed endpoint instead of files");
  g->add_option("--dist-kind", o.dist_kind, "file | remote | one_hot_oracle | uniform | none");
  g->add_option("--pool-dist", o.pool_dist, "Pool label distributions file");
  g->add_option("--test-dist", o.test_dist, "Test label distributions file");
  g->add_option("--dist-endpoint", o.dist_endpoint, "Remote /classify endpoint");
  g->add_option("--oracle-mode", o.oracle_mode, "faithful | reversed | arbitrary")->capture_default_str();
  g->add_option("--template", o.template_ref, "Template family or template file")->capture_default_str();
  g->add_option("--completion", o.completion, "remote | mock_majority | mock_echo")->capture_default_str();
  g->add_option("--completion-endpoint", o.completion_endpoint, "Remote /complete endpoint");
  g->add_option("--max-tokens", o.max_tokens)->capture_default_str();
  g->add_option("--perturb", o.perturb, "none | reversed | arbitrary")->capture_default_str();
  g->add_flag("--shuffle-symbols", o.shuffle_symbols, "Seeded assignment of arbitrary symbols");
  g->add_option("--seed", o.seed)->capture_default_str();
  g->add_option("--parallelism", o.parallelism, "Test examples processed concurrently")->capture_default_str();
  g->add_option("--report-dir", o.report_dir, "Persist reports and the run index here");
  g->add_option("--timeout-ms", o.timeout_ms)->capture_default_str();
  g->add_option("--max-retries", o.max_retries)->capture_default_str();
  g->add_option("--max-in-flight", o.max_in_flight)->capture_default_str();

  auto* run = app.add_subcommand("run", "Run the full pipeline and emit a RunReport");
  std::string run_out;
  run->add_option("--out", run_out, "Write the report here instead of stdout");

  auto* select = app.add_subcommand("select", "Emit ranked demonstrations for test ids");
  std::string select_ids;
  select->add_option("--ids", select_ids, "Comma-separated test ids (default: all)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Vary one hyperparameter");
  std::string dimension = "alpha";
  std::string values;
  sweep_cmd->add_option("--dimension", dimension, "alpha | n_shot | k_candidates")->capture_default_str();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Run every selection method");

  auto* ttest = app.add_subcommand("ttest", "Paired t-test on per-seed accuracies");
  std::string a_list, b_list, a_file, b_file;
  ttest->add_option("--a", a_list, "Comma-separated accuracies of system A");
  ttest->add_option("--b", b_list, "Comma-separated accuracies of system B");
  ttest->add_option("--a-file", a_file, "One accuracy per line");
  ttest->add_option("--b-file", b_file, "One accuracy per line");

  auto* gen = app.add_subcommand("gen-synthetic", "Write the bundled synthetic corpus");
  l2d::SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--n-pool", spec.n_pool)->capture_default_str();
  gen->add_option("--n-test", spec.n_test)->capture_default_str();
  gen->add_option("--classes", spec.num_classes)->capture_default_str();
  gen->add_option("--dim", spec.dim)->capture_default_str();
  gen->add_option("--clusters", spec.n_clusters)->capture_default_str();
  gen->add_option("--noise", spec.label_noise)->capture_default_str();
  gen->add_option("--spread", spec.spread)->capture_default_str();
  gen->add_option("--gen-seed", spec.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) {
      const auto data = l2d::generate_synthetic(spec);
      l2d::write_synthetic(data, gen_out);
      std::printf("wrote %zu pool and %zu test examples to %s\n", data.pool.size(),
                  data.test.size(), gen_out.c_str());
      return 0;
    }
    if (*ttest) {
      const auto a = a_file.empty() ? parse_numbers(a_list) : read_numbers_file(a_file);
      const auto b = b_file.empty() ? parse_numbers(b_list) : read_numbers_file(b_file);
      l2d::TTestResult r;
      try {
        r = l2d::paired_t_test(a, b);
      } catch (const l2d::InvalidArgument& e) {
        throw l2d::ConfigError(e.what());
      }
      std::cout << l2d::Json{{"t", r.t_statistic}, {"p", r.p_value}, {"df", r.df}}.dump() << "\n";
      return 0;
    }

    const l2d::RunConfig config = build_config(o);
    const l2d::PipelineInputs inputs = l2d::load_inputs(config);
    const auto client = l2d::make_completion_client(config);

    if (*run) {
      const auto report = l2d::run_pipeline(config, inputs, *client);
      if (run_out.empty()) {
        std::cout << l2d::serialize_report(report);
      } else {
        l2d::io::write_file_atomic(run_out, l2d::serialize_report(report));
        print_summary(std::string(l2d::to_string(config.method)), report);
      }
    } else if (*select) {
      l2d::validate_inputs(config, inputs);
      const auto wanted = split_list(select_ids);
      for (std::size_t i = 0; i < inputs.test.size(); ++i) {
        const auto& ex = inputs.test.examples[i];
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), ex.id) == wanted.end()) continue;
        auto ranked = l2d::rank_candidates(config, inputs, ex, i);
        auto chosen = l2d::select_for(config, inputs, ex, i);
        l2d::Json rj = l2d::Json::array();
        for (const auto& c : ranked) {
          rj.push_back({{"train_id", c.train_id}, {"s_text", c.s_text}, {"s_label", c.s_label},
                        {"s_hybrid", c.s_hybrid}});
        }
        l2d::Json sj = l2d::Json::array();
        for (const auto& c : chosen) sj.push_back(c.train_id);
        std::cout << l2d::Json{{"test_id", ex.id}, {"ranked", rj}, {"selected", sj}}.dump() << "\n";
      }
      for (const auto& id : wanted) {
        if (!inputs.test.find(id)) throw l2d::ConfigError("unknown test id '" + id + "'");
      }
    } else if (*sweep_cmd) {
      const auto points = l2d::sweep(config, inputs, *client, l2d::parse_sweep_dimension(dimension),
                                     parse_numbers(values));
      for (const auto& p : points) {
        char value[32];
        std::snprintf(value, sizeof value, "%g", p.value);
        const std::string label = dimension + "=" + value;
        if (p.report) {
          print_summary(label, *p.report);
        } else {
          std::printf("%-16s error: %s\n", label.c_str(), p.error.c_str());
        }
      }
    } else if (*ablate_cmd) {
      for (const auto& [m, r] : l2d::ablate(config, inputs, *client)) {
        print_summary(std::string(l2d::to_string(m)), r);
      }
    }
    return 0;
  } catch (const l2d::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const l2d::ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const l2d::InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 1;
  } catch (const l2d::ProviderError& e) {
    std::fprintf(stderr, "provider error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
