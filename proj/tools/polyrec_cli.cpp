// Command-line driver: polyrec <subcommand> [options]

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polyrec/polyrec.hpp"

namespace {

using namespace polyrec;

void print_error(const std::string& error, const std::string& detail) {
  nlohmann::ordered_json j;
  j["error"] = error;
  j["detail"] = detail;
  std::cerr << j.dump() << "\n";
}

void emit(const std::string& content, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << content;
  else
    write_file(out, content);
}

struct Common {
  std::string config;
  std::size_t workers = 0;  // 0: use the config value
  std::string out;
};

struct Loaded {
  PipelineConfig config;
  PipelineResources resources;
};

Loaded load_all(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  auto config = PipelineConfig::load(c.config);
  if (c.workers > 0) config.workers = c.workers;
  auto res = PipelineResources::load(config);
  return {std::move(config), std::move(res)};
}

int cmd_preprocess(const Common& c, bool candidates_only) {
  const auto [config, res] = load_all(c);
  const auto raw = load_corpus(config.corpus);
  std::vector<Document> docs(raw.size());
  const auto opts = res.preprocess_options();
  parallel_for(raw.size(), config.workers, [&](std::size_t i) { docs[i] = preprocess(raw[i], opts); });
  std::string out;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (candidates_only && !(is_polymer_relevant(docs[i]) && has_numeric_info(docs[i]))) continue;
    out += document_to_json(raw[i], docs[i]).dump() + "\n";
    ++kept;
  }
  emit(out, c.out);
  std::cerr << raw.size() << " in / " << kept << " out\n";
  return 0;
}

int cmd_tag(const Common& c) {
  const auto [config, res] = load_all(c);
  const auto raw = load_corpus(config.corpus);
  auto docs = prepare_corpus(raw, res, config.workers);
  tag_corpus(docs, res, config.workers);
  emit(annotated_to_jsonl(to_annotated(docs)), c.out);
  return 0;
}

int cmd_extract(const Common& c) {
  const auto [config, res] = load_all(c);
  const auto result = run_extraction(config, res);
  const std::string out = c.out.empty() ? config.output : c.out;
  write_file(out, records_to_jsonl(result.records));
  write_file(out + ".diagnostics.jsonl", diagnostics_to_jsonl(result.diagnostics));
  std::cout << result.summary() << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path, const std::string& out) {
  const auto pred = load_annotated(pred_path);
  const auto gold = load_annotated(gold_path);
  const auto report = evaluate_ner(pred, gold);
  std::printf("%-20s %6s %6s %6s %9s %9s %9s\n", "label", "tp", "fp", "fn", "P", "R", "F1");
  auto fmt = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.1f", *v);
    return std::string(buf);
  };
  auto row = [&](std::string_view name, const Scores& s) {
    std::printf("%-20.*s %6zu %6zu %6zu %9s %9s %9s\n", static_cast<int>(name.size()), name.data(), s.counts.tp,
                s.counts.fp, s.counts.fn, fmt(s.precision).c_str(), fmt(s.recall).c_str(), fmt(s.f1).c_str());
  };
  for (const auto& [label, s] : report.per_label) row(to_string(label), s);
  row("overall", report.overall);
  if (!out.empty()) write_file(out, report_to_json(report).dump(2) + "\n");
  return 0;
}

int cmd_kappa(const std::vector<std::string>& annotations, const std::string& out) {
  std::map<std::string, std::vector<AnnotatedDocument>> annotators;
  for (const auto& spec : annotations) {
    auto eq = spec.find('=');
    std::string name = eq == std::string::npos ? std::filesystem::path(spec).stem().string() : spec.substr(0, eq);
    std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    if (!annotators.emplace(name, load_annotated(path)).second)
      throw InvalidArgument("duplicate annotator name: " + name);
  }
  const auto report = compute_agreement(annotators);
  nlohmann::ordered_json j;
  j["items"] = report.items;
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [names, k] : report.cohen_pairwise)
    pairs.push_back({{"a", names.first}, {"b", names.second}, {"cohen_kappa", k}});
  j["cohen"] = std::move(pairs);
  j["fleiss_kappa"] = report.fleiss;
  j["p_o"] = report.p_o;
  j["p_e"] = report.p_e;
  emit(j.dump(2) + "\n", out);
  return 0;
}

std::string records_path(const std::string& records, const std::string& config) {
  if (!records.empty()) return records;
  if (config.empty()) throw ConfigError("--records or --config is required");
  return PipelineConfig::load(config).output;
}

int cmd_stats(const std::string& records, std::size_t min_count, const std::string& out) {
  const auto store = RecordStore::load(records);
  const auto hist = property_histogram(store.records(), min_count);
  const auto comp = composition_counts(store.records());
  const auto years = yearly_counts(store.records());
  nlohmann::ordered_json j;
  j["records"] = store.size();
  j["composition"] = {{"NEAT", comp.neat}, {"BLEND", comp.blend}, {"COMPOSITE", comp.composite}};
  j["unique_polymers"] = count_unique_polymers(store.records());
  auto props = nlohmann::ordered_json::array();
  for (const auto& h : hist) props.push_back({{"property", h.property}, {"count", h.count}});
  j["properties"] = std::move(props);
  nlohmann::ordered_json yj = nlohmann::ordered_json::object();
  for (const auto& [y, n] : years) yj[y ? std::to_string(*y) : "unknown"] = n;
  j["yearly"] = std::move(yj);
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file((std::filesystem::path(out) / "histogram.csv").string(), histogram_csv(hist));
    write_file((std::filesystem::path(out) / "yearly.csv").string(), yearly_csv(years));
  }
  return 0;
}

int cmd_scatter(const std::string& records, const std::string& x, const std::string& y, const std::string& scope_name,
                const std::string& out) {
  const auto scope = parse_scatter_scope(scope_name);
  if (!scope) throw InvalidArgument("scope must be SAME_RECORD_MATERIALS or SAME_DOCUMENT");
  const auto store = RecordStore::load(records);
  emit(scatter_csv(scatter_pairs(store.records(), x, y, *scope)), out);
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& records, const std::string& host, int port) {
  RecordService service(records);
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "serving " << service.snapshot()->size() << " records on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polymer property record extraction"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "pipeline config JSON")->required();
    sub->add_option("--workers", common.workers, "worker threads (overrides config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out, "output path");
  };

  bool candidates = false;
  auto* preprocess_cmd = app.add_subcommand("preprocess", "strip markup and split sentences");
  add_common(preprocess_cmd);
  preprocess_cmd->add_flag("--annotation-candidates", candidates,
                           "keep only polymer-relevant documents with numeric information");

  auto* tag_cmd = app.add_subcommand("tag", "label tokens with the gazetteer tagger");
  add_common(tag_cmd);

  auto* extract_cmd = app.add_subcommand("extract", "extract material property records");
  add_common(extract_cmd);

  std::string pred, gold, out;
  auto* eval_cmd = app.add_subcommand("eval", "strict entity-level NER evaluation");
  eval_cmd->add_option("--pred", pred, "predicted annotations JSONL")->required();
  eval_cmd->add_option("--gold", gold, "gold annotations JSONL")->required();
  eval_cmd->add_option("--out", out, "write the JSON report here");

  std::vector<std::string> annotations;
  auto* kappa_cmd = app.add_subcommand("kappa", "inter-annotator agreement");
  kappa_cmd->add_option("annotations", annotations, "[name=]path per annotator")->required()->expected(2, -1);
  kappa_cmd->add_option("--out", out, "output path");

  std::string records, config;
  std::size_t min_count = 0;
  auto* stats_cmd = app.add_subcommand("stats", "record counts, histogram and yearly trend");
  stats_cmd->add_option("--records", records, "records JSONL");
  stats_cmd->add_option("--config", config, "take the records path from this config");
  stats_cmd->add_option("--min-count", min_count, "histogram threshold");
  stats_cmd->add_option("--out", out, "directory for CSV exports");

  std::string x, y, scope = "SAME_RECORD_MATERIALS";
  auto* scatter_cmd = app.add_subcommand("scatter", "property pair scatter as CSV");
  scatter_cmd->add_option("--records", records, "records JSONL");
  scatter_cmd->add_option("--config", config, "take the records path from this config");
  scatter_cmd->add_option("-x,--x", x, "x property")->required();
  scatter_cmd->add_option("-y,--y", y, "y property")->required();
  scatter_cmd->add_option("--scope", scope, "SAME_RECORD_MATERIALS or SAME_DOCUMENT");
  scatter_cmd->add_option("--out", out, "output path");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP query service");
  serve_cmd->add_option("--records", records, "records JSONL");
  serve_cmd->add_option("--config", config, "take the records path from this config");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (preprocess_cmd->parsed()) return cmd_preprocess(common, candidates);
    if (tag_cmd->parsed()) return cmd_tag(common);
    if (extract_cmd->parsed()) return cmd_extract(common);
    if (eval_cmd->parsed()) return cmd_eval(pred, gold, out);
    if (kappa_cmd->parsed()) return cmd_kappa(annotations, out);
    if (stats_cmd->parsed()) return cmd_stats(records_path(records, config), min_count, out);
    if (scatter_cmd->parsed()) return cmd_scatter(records_path(records, config), x, y, scope, out);
    if (serve_cmd->parsed()) return cmd_serve(records_path(records, config), host, port);
  } catch (const ConfigError& e) {
    print_error("config_error", e.what());
    return 2;
  } catch (const SchemaError& e) {
    print_error("schema_error", e.what());
    return 3;
  } catch (const Error& e) {
    print_error("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
  return 1;
}
