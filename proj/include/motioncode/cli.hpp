#pragma once

// The motioncode command line. run() returns the process exit code:
// 0 success, 1 domain error, 2 usage error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motioncode/data.hpp"
#include "motioncode/error.hpp"
#include "motioncode/experiment.hpp"
#include "motioncode/http.hpp"
#include "motioncode/service.hpp"
#include "motioncode/taxonomy.hpp"
#include "motioncode/tree.hpp"

namespace motioncode::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline std::string subcommand_list(const CLI::App& app) {
  std::string out;
  for (const auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (!out.empty()) out += ", ";
    out += sub->get_name();
  }
  return out;
}

/// Deepest subcommand the user selected, for usage hints.
inline const CLI::App* selected(const CLI::App& app) {
  const CLI::App* cur = &app;
  for (;;) {
    const auto chosen = cur->get_subcommands();
    if (chosen.empty()) return cur;
    cur = chosen.front();
  }
}

inline ComponentWeights parse_weights(const std::vector<double>& w) {
  if (w.size() != kComponentCount) throw Error(ErrorKind::InvalidConfig, "--weights needs 5 values");
  ComponentWeights out{};
  for (std::size_t k = 0; k < kComponentCount; ++k) out[k] = w[k];
  return out;
}

struct Wizard {
  std::istream& in;
  std::ostream& out;

  /// Returns nullopt if input ends before the walk completes.
  std::optional<MotionCode> run() {
    TreeWalker walker;
    while (!walker.complete()) {
      const auto& node = walker.current();
      out << '\n' << node["question"].get<std::string>() << '\n';
      if (node.contains("help")) out << "  (" << node["help"].get<std::string>() << ")\n";
      const auto& options = node["options"];
      for (std::size_t i = 0; i < options.size(); ++i) {
        out << "  " << i + 1 << ") " << options[i]["label"].get<std::string>() << '\n';
      }
      out << "choice" << (walker.depth() ? " (b = back)" : "") << ": " << std::flush;
      std::string answer;
      if (!std::getline(in, answer)) return std::nullopt;
      if (answer == "b" || answer == "back") {
        walker.back();
        continue;
      }
      std::size_t choice = 0;
      try {
        choice = std::stoul(answer);
      } catch (const std::exception&) {
        out << "enter a number between 1 and " << options.size() << '\n';
        continue;
      }
      if (choice == 0 || choice > options.size()) {
        out << "enter a number between 1 and " << options.size() << '\n';
        continue;
      }
      walker.choose(choice - 1);
    }
    return walker.code();
  }
};

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               std::istream& in = std::cin) {
  CLI::App app{"Motion taxonomy codes, embedding and verb models, annotation service", "motioncode"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // code
  auto* code = app.add_subcommand("code", "Motion code utilities");
  code->require_subcommand(1);
  std::string code_text, code_other;
  bool compact = false;
  std::vector<double> weights;
  std::string verb_query;
  bool table = false;

  auto* c_parse = code->add_subcommand("parse", "Validate a code and print its components");
  c_parse->add_option("code", code_text, "Code, hyphenated or 9 bits")->required();
  auto* c_fmt = code->add_subcommand("fmt", "Print a code in canonical form");
  c_fmt->add_option("code", code_text)->required();
  c_fmt->add_flag("--compact", compact, "Print the 9-bit form without separators");
  auto* c_dist = code->add_subcommand("dist", "Distance between two codes");
  c_dist->add_option("a", code_text)->required();
  c_dist->add_option("b", code_other)->required();
  c_dist->add_option("--weights", weights, "Five component weights for the weighted distance")->expected(5);
  auto* c_enum = code->add_subcommand("enum", "List every valid code");
  c_enum->add_flag("--compact", compact);
  auto* c_verbs = code->add_subcommand("verbs", "Verb hints for a code, codes for a verb, or the whole table");
  c_verbs->add_option("code", code_text);
  c_verbs->add_option("--verb", verb_query, "List codes associated with a verb");
  c_verbs->add_flag("--table", table, "Print the verb/code table as JSON");

  // data
  auto* data = app.add_subcommand("data", "Dataset tools");
  data->require_subcommand(1);
  std::string config_path, out_dir, dataset_path, vectors_path;
  auto* d_synth = data->add_subcommand("synth", "Generate a synthetic dataset");
  d_synth->add_option("--config", config_path, "Run config; writes its train/val/word_vectors paths");
  d_synth->add_option("--out", out_dir, "Output directory when no config is given");
  SynthConfig synth;
  d_synth->add_option("--seed", synth.seed);
  d_synth->add_option("--sigma", synth.noise_sigma);
  d_synth->add_option("--feature-dim", synth.feature_dim);
  d_synth->add_option("--informativeness", synth.noun_informativeness);
  d_synth->add_option("--n-train", synth.n_train);
  d_synth->add_option("--n-val", synth.n_val);
  auto* d_check = data->add_subcommand("check", "Validate a dataset file and print statistics");
  d_check->add_option("dataset", dataset_path)->required();
  d_check->add_option("--word-vectors", vectors_path, "Also check that every noun has a vector");

  // train / eval
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->require_subcommand(1);
  auto* t_embed = train->add_subcommand("embed", "Motion code embedding model");
  auto* t_verb = train->add_subcommand("verb", "Baseline verb classifier");
  auto* t_fusion = train->add_subcommand("fusion", "Fusion MLP over a frozen baseline and motion source");
  auto* evaluate = app.add_subcommand("eval", "Evaluate from a run config");
  evaluate->require_subcommand(1);
  auto* e_report = evaluate->add_subcommand("report", "Top-1 report for the configured fusion model");
  auto* e_sweep = evaluate->add_subcommand("sweep", "Corruption sweep");
  for (auto* sub : {t_embed, t_verb, t_fusion, e_report, e_sweep}) {
    sub->add_option("--config", config_path, "Run config (JSON)")->required();
  }

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  std::string manifest_path, store_path, host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--manifest", manifest_path)->required();
  serve->add_option("--store", store_path)->required();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Terminal annotation wizard");
  bool interactive = false;
  std::string clip_id, annotator;
  annotate->add_flag("--interactive", interactive)->required();
  annotate->add_option("--manifest", manifest_path);
  annotate->add_option("--store", store_path);
  annotate->add_option("--clip", clip_id);
  annotate->add_option("--annotator", annotator);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << detail::selected(app)->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto* sub = detail::selected(app);
    const auto list = detail::subcommand_list(*sub);
    if (!list.empty()) err << "valid subcommands: " << list << '\n';
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (c_parse->parsed()) {
      const auto c = parse_code(code_text);
      out << format_code(c) << '\n';
      for (const auto& [name, text] : describe(c)) out << "  " << name << ": " << text << '\n';
      const auto verbs = verbs_for_code(c);
      if (!verbs.empty()) {
        out << "  verbs:";
        for (const auto& v : verbs) out << ' ' << v;
        out << '\n';
      }
    } else if (c_fmt->parsed()) {
      out << format_code(parse_code(code_text), compact ? CodeStyle::Compact : CodeStyle::Hyphenated) << '\n';
    } else if (c_dist->parsed()) {
      const auto a = parse_code(code_text);
      const auto b = parse_code(code_other);
      out << "hamming=" << hamming(a, b) << '\n';
      if (!weights.empty()) out << "weighted=" << weighted_distance(a, b, detail::parse_weights(weights)) << '\n';
    } else if (c_enum->parsed()) {
      for (const auto& c : enumerate_codes()) {
        out << format_code(c, compact ? CodeStyle::Compact : CodeStyle::Hyphenated) << '\n';
      }
    } else if (c_verbs->parsed()) {
      const int modes = !code_text.empty() + !verb_query.empty() + table;
      if (modes != 1) {
        err << "error: give exactly one of <code>, --verb or --table\n";
        return kExitUsage;
      }
      if (table) {
        out << VerbCodeTable::builtin().to_json().dump(2) << '\n';
      } else if (!verb_query.empty()) {
        for (const auto& c : codes_for_verb(verb_query)) out << format_code(c) << '\n';
      } else {
        for (const auto& v : verbs_for_code(parse_code(code_text))) out << v << '\n';
      }
    } else if (d_synth->parsed()) {
      std::vector<std::filesystem::path> written;
      if (!config_path.empty()) {
        written = run_synth(RunConfig::load(config_path));
      } else if (!out_dir.empty()) {
        synth.validate();
        RunConfig c;
        c.base_dir = out_dir;
        c.train = "train.jsonl";
        c.val = "val.jsonl";
        c.word_vectors = "nouns.txt";
        c.synth = synth;
        written = run_synth(c);
      } else {
        err << "error: data synth needs --config or --out\n";
        return kExitUsage;
      }
      for (const auto& p : written) out << p.generic_string() << '\n';
    } else if (d_check->parsed()) {
      const Dataset ds = load_dataset(dataset_path);
      auto stats = dataset_stats(ds).to_json();
      stats["feature_dim"] = ds.feature_dim();
      if (!vectors_path.empty()) {
        const auto table_vectors = load_word_vectors(vectors_path);
        for (const auto& ex : ds.examples()) (void)table_vectors.lookup(ex.noun);
        stats["word_vectors"] = {{"dim", table_vectors.dim()}, {"tokens", table_vectors.tokens().size()}};
      }
      out << stats.dump(2) << '\n';
    } else if (train->parsed() || evaluate->parsed()) {
      const RunConfig c = RunConfig::load(config_path);
      std::vector<std::filesystem::path> written;
      if (t_embed->parsed()) written = run_train_embed(c);
      if (t_verb->parsed()) written = run_train_verb(c);
      if (t_fusion->parsed()) written = run_train_fusion(c);
      if (e_report->parsed()) written = run_eval_report(c);
      if (e_sweep->parsed()) written = run_eval_sweep(c);
      for (const auto& p : written) out << p.generic_string() << '\n';
    } else if (serve->parsed()) {
      AnnotationService service(Manifest::load(manifest_path), store_path);
      httplib::Server server;
      bind_routes(server, service);
      if (port == 0) {
        port = server.bind_to_any_port(host);
      } else if (!server.bind_to_port(host, port)) {
        throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
      }
      out << "listening on http://" << host << ':' << port << '\n' << std::flush;
      server.listen_after_bind();
    } else if (annotate->parsed()) {
      const bool recording = !store_path.empty() || !manifest_path.empty() || !clip_id.empty();
      if (recording && (store_path.empty() || manifest_path.empty() || clip_id.empty())) {
        err << "error: recording needs --manifest, --store and --clip together\n";
        return kExitUsage;
      }
      std::optional<AnnotationService> service;
      if (recording) {
        service.emplace(Manifest::load(manifest_path), store_path);
        if (!service->clips().find(clip_id)) throw Error(ErrorKind::UnknownClip, clip_id);
      }
      detail::Wizard wizard{in, out};
      const auto result = wizard.run();
      if (!result) {
        err << "error: input ended before the code was complete\n";
        return kExitDomain;
      }
      out << "\ncode: " << format_code(*result) << '\n';
      const auto verbs = verbs_for_code(*result);
      if (!verbs.empty()) {
        out << "verbs:";
        for (const auto& v : verbs) out << ' ' << v;
        out << '\n';
      }
      if (service) {
        const nlohmann::json body{{"clip_id", clip_id}, {"code", format_code(*result)}, {"annotator", annotator}};
        const auto res = service->post_annotation(body.dump(), false);
        if (res.status != 201) {
          err << "error: " << res.body << '\n';
          return kExitDomain;
        }
        out << "recorded " << clip_id << '\n';
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr, std::cin);
}

}  // namespace motioncode::cli
