#pragma once

// Read-only HTTP query service over a RecordStore snapshot. Handlers are
// plain functions of (snapshot, params) so they can be called directly.

#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "polyrec/error.hpp"
#include "polyrec/store.hpp"

namespace polyrec {

using QueryParams = std::multimap<std::string, std::string>;

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

inline ApiResponse api_error(int status, std::string error, std::string detail) {
  nlohmann::ordered_json j;
  j["error"] = std::move(error);
  j["detail"] = std::move(detail);
  return {status, std::move(j)};
}

namespace detail {

struct BadParam : Error {
  std::string code;
  BadParam(std::string c, const std::string& what) : Error(what), code(std::move(c)) {}
};

class ParamReader {
 public:
  ParamReader(const QueryParams& params, std::set<std::string> allowed) : params_(params) {
    for (const auto& [k, _] : params)
      if (!allowed.count(k)) throw BadParam("unknown_parameter", "unknown parameter '" + k + "'");
    for (const auto& k : allowed)
      if (params.count(k) > 1) throw BadParam("repeated_parameter", "parameter '" + k + "' given more than once");
  }

  std::optional<std::string> string(const std::string& key) const {
    auto it = params_.find(key);
    if (it == params_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> number(const std::string& key) const {
    auto s = string(key);
    if (!s) return std::nullopt;
    double v = 0.0;
    const auto* b = s->data();
    const auto* e = s->data() + s->size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || s->empty() || !std::isfinite(v))
      throw BadParam("invalid_number", "parameter '" + key + "' is not a number: '" + *s + "'");
    return v;
  }

  std::optional<long long> integer(const std::string& key) const {
    auto s = string(key);
    if (!s) return std::nullopt;
    long long v = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || p != s->data() + s->size() || s->empty())
      throw BadParam("invalid_integer", "parameter '" + key + "' is not an integer: '" + *s + "'");
    return v;
  }

 private:
  const QueryParams& params_;
};

inline const std::set<std::string>& filter_param_names() {
  static const std::set<std::string> names = {"property", "material", "min",   "max",
                                              "year_min", "year_max", "class", "keyword"};
  return names;
}

inline RecordFilter read_filter(const ParamReader& r) {
  RecordFilter f;
  f.property = r.string("property");
  f.material = r.string("material");
  f.keyword = r.string("keyword");
  const auto lo = r.number("min");
  const auto hi = r.number("max");
  if (lo || hi) {
    f.value_range = ValueRange{lo.value_or(-HUGE_VAL), hi.value_or(HUGE_VAL)};
    if (f.value_range->lo > f.value_range->hi) throw BadParam("malformed_range", "min is greater than max");
  }
  auto year = [&](const char* key) -> std::optional<int> {
    auto v = r.integer(key);
    if (!v) return std::nullopt;
    if (*v < -100000 || *v > 100000) throw BadParam("invalid_integer", std::string("parameter '") + key + "' out of range");
    return static_cast<int>(*v);
  };
  f.year_min = year("year_min");
  f.year_max = year("year_max");
  if (f.year_min && f.year_max && *f.year_min > *f.year_max)
    throw BadParam("malformed_range", "year_min is greater than year_max");
  if (auto c = r.string("class")) {
    f.composition = parse_composition_class(*c);
    if (!f.composition) throw BadParam("invalid_class", "class must be NEAT, BLEND or COMPOSITE");
  }
  return f;
}

inline std::set<std::string> with_filter_params(std::set<std::string> extra) {
  extra.insert(filter_param_names().begin(), filter_param_names().end());
  return extra;
}

template <typename Fn>
ApiResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const BadParam& e) {
    return api_error(400, e.code, e.what());
  } catch (const UnknownProperty& e) {
    return api_error(404, "unknown_property", e.what());
  } catch (const InvalidArgument& e) {
    return api_error(400, "invalid_argument", e.what());
  }
}

inline void require_known_property(const RecordStore& store, const RecordFilter& f) {
  if (f.property && !store.has_property(*f.property)) throw UnknownProperty("unknown property: " + *f.property);
}

inline nlohmann::ordered_json yearly_json(const std::map<std::optional<int>, std::size_t>& counts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [year, n] : counts) j[year ? std::to_string(*year) : std::string("unknown")] = n;
  return j;
}

}  // namespace detail

inline constexpr std::size_t kDefaultPageSize = 50;

/// GET /records: filter params plus page (1-based) and page_size.
inline ApiResponse handle_records(const RecordStore& store, const QueryParams& params) {
  return detail::guarded([&] {
    detail::ParamReader r(params, detail::with_filter_params({"page", "page_size"}));
    const auto filter = detail::read_filter(r);
    const long long page = r.integer("page").value_or(1);
    const long long page_size = r.integer("page_size").value_or(static_cast<long long>(kDefaultPageSize));
    if (page_size < 1 || page_size > 1000) throw detail::BadParam("invalid_page_size", "page_size must be in [1, 1000]");
    if (page < 1) throw detail::BadParam("invalid_page", "page must be >= 1");
    detail::require_known_property(store, filter);
    const auto result = store.query(filter, static_cast<std::size_t>(page), static_cast<std::size_t>(page_size));
    nlohmann::ordered_json j;
    j["total"] = result.total;
    j["page"] = result.page;
    j["page_size"] = result.page_size;
    auto records = nlohmann::ordered_json::array();
    for (const auto* rec : result.records) records.push_back(record_to_json(*rec));
    j["records"] = std::move(records);
    return ApiResponse{200, std::move(j)};
  });
}

/// GET /properties: histogram with optional min_count.
inline ApiResponse handle_properties(const RecordStore& store, const QueryParams& params) {
  return detail::guarded([&] {
    detail::ParamReader r(params, {"min_count"});
    const long long min_count = r.integer("min_count").value_or(0);
    if (min_count < 0) throw detail::BadParam("invalid_integer", "min_count must be >= 0");
    nlohmann::ordered_json j;
    auto props = nlohmann::ordered_json::array();
    for (const auto& h : property_histogram(store.records(), static_cast<std::size_t>(min_count)))
      props.push_back({{"property", h.property}, {"count", h.count}});
    j["properties"] = std::move(props);
    return ApiResponse{200, std::move(j)};
  });
}

/// GET /stats: composition counts, unique polymers and yearly counts over
/// the records matching the filter params.
inline ApiResponse handle_stats(const RecordStore& store, const QueryParams& params) {
  return detail::guarded([&] {
    detail::ParamReader r(params, detail::filter_param_names());
    const auto filter = detail::read_filter(r);
    detail::require_known_property(store, filter);
    const auto records = store.filtered(filter);
    const auto comp = composition_counts(records);
    nlohmann::ordered_json j;
    j["records"] = records.size();
    j["composition"] = {{"NEAT", comp.neat}, {"BLEND", comp.blend}, {"COMPOSITE", comp.composite}};
    j["unique_polymers"] = count_unique_polymers(records);
    j["yearly"] = detail::yearly_json(yearly_counts(records));
    return ApiResponse{200, std::move(j)};
  });
}

/// GET /scatter?x=&y=&scope=
inline ApiResponse handle_scatter(const RecordStore& store, const QueryParams& params) {
  return detail::guarded([&] {
    detail::ParamReader r(params, {"x", "y", "scope"});
    const auto x = r.string("x");
    const auto y = r.string("y");
    if (!x || !y) throw detail::BadParam("missing_parameter", "x and y are required");
    auto scope = ScatterScope::SameRecordMaterials;
    if (auto s = r.string("scope")) {
      auto parsed = parse_scatter_scope(*s);
      if (!parsed) throw detail::BadParam("invalid_scope", "scope must be SAME_RECORD_MATERIALS or SAME_DOCUMENT");
      scope = *parsed;
    }
    const auto points = scatter_pairs(store.records(), *x, *y, scope);
    nlohmann::ordered_json j;
    j["x"] = *x;
    j["y"] = *y;
    j["scope"] = std::string(to_string(scope));
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : points) {
      nlohmann::ordered_json pj;
      pj["x"] = p.x;
      pj["y"] = p.y;
      pj["doc_id"] = p.doc_id;
      pj["year"] = p.year ? nlohmann::ordered_json(*p.year) : nlohmann::ordered_json(nullptr);
      arr.push_back(std::move(pj));
    }
    j["points"] = std::move(arr);
    return ApiResponse{200, std::move(j)};
  });
}

inline ApiResponse handle_healthz(const RecordStore& store) {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["records"] = store.size();
  return {200, std::move(j)};
}

/// Owns the current snapshot; readers take a shared_ptr copy, reload swaps it.
class RecordService {
 public:
  explicit RecordService(std::string records_path)
      : path_(std::move(records_path)), snapshot_(std::make_shared<const RecordStore>(RecordStore::load(path_))) {}

  RecordService(std::string records_path, RecordStore store)
      : path_(std::move(records_path)), snapshot_(std::make_shared<const RecordStore>(std::move(store))) {}

  std::shared_ptr<const RecordStore> snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
  }

  /// Re-reads the records file. On failure the old snapshot stays.
  std::size_t reload() {
    auto fresh = std::make_shared<const RecordStore>(RecordStore::load(path_));
    const std::size_t n = fresh->size();
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(fresh);
    return n;
  }

  /// Registers every endpoint on `server`.
  void mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto route = [this, &server](const char* path, ApiResponse (*fn)(const RecordStore&, const QueryParams&)) {
      server.Get(path, [this, fn](const httplib::Request& req, httplib::Response& res) {
        send(res, fn(*snapshot(), QueryParams(req.params.begin(), req.params.end())));
      });
    };
    route("/records", &handle_records);
    route("/properties", &handle_properties);
    route("/stats", &handle_stats);
    route("/scatter", &handle_scatter);
    server.Get("/healthz",
               [this](const httplib::Request&, httplib::Response& res) { send(res, handle_healthz(*snapshot())); });
    server.Post("/reload", [this](const httplib::Request&, httplib::Response& res) {
      try {
        const auto n = reload();
        nlohmann::ordered_json j;
        j["status"] = "reloaded";
        j["records"] = n;
        send(res, {200, std::move(j)});
      } catch (const Error& e) {
        send(res, api_error(500, "reload_failed", e.what()));
      }
    });
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      send(res, api_error(res.status, res.status == 404 ? "not_found" : "error", "no such endpoint"));
    });
  }

  const std::string& path() const noexcept { return path_; }

 private:
  static void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  std::string path_;
  mutable std::mutex mutex_;
  std::shared_ptr<const RecordStore> snapshot_;
};

}  // namespace polyrec
