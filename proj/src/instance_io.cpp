#include "cec/instance_io.hpp"

#include <fstream>

#include "cec/errors.hpp"

namespace cec {

using nlohmann::json;

json instance_to_json(const SystemState& state) {
  json doc;
  doc["delta_t"] = state.grid.delta_t;
  doc["delta"] = state.grid.horizon;
  doc["slot"] = state.grid.origin;
  doc["offers"] = json::array();
  for (const auto& o : state.offers)
    doc["offers"].push_back(
        {{"bs", o.bs_id}, {"capacity", o.capacity}, {"price", o.price}});
  doc["requests"] = json::array();
  for (const auto& r : state.requests)
    doc["requests"].push_back({{"id", r.task_id},
                               {"origin", r.origin_bs},
                               {"w", r.workload},
                               {"u0", r.max_utility},
                               {"alpha", r.latency_penalty}});
  return doc;
}

SystemState instance_from_json(const json& doc) {
  SystemState s;
  try {
    s.grid.delta_t = doc.at("delta_t").get<double>();
    s.grid.horizon = doc.at("delta").get<int>();
    s.grid.origin = doc.value("slot", 0L);
    for (const auto& o : doc.at("offers")) {
      ResourceOffer offer;
      offer.bs_id = o.at("bs").get<int>();
      offer.posted_at = s.grid.origin;
      offer.capacity = o.at("capacity").get<std::vector<double>>();
      offer.price = o.at("price").get<std::vector<double>>();
      s.offers.push_back(std::move(offer));
    }
    for (const auto& r : doc.at("requests")) {
      OffloadRequest req;
      req.task_id = r.at("id").get<int>();
      req.origin_bs = r.value("origin", 0);
      req.posted_at = s.grid.origin;
      req.workload = r.at("w").get<double>();
      req.max_utility = r.at("u0").get<double>();
      req.latency_penalty = r.at("alpha").get<double>();
      s.requests.push_back(req);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed instance: ") + e.what());
  }
  s.validate();
  return s;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

SystemState load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_json_file(path));
}

void save_instance(const SystemState& state, const std::filesystem::path& path) {
  write_json_file(instance_to_json(state), path);
}

}  // namespace cec
