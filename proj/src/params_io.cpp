#include <fstream>
#include "json.hpp"

#include "tbf/data_io.hpp"
#include "tbf/errors.hpp"

namespace tbf {

void save_params(const std::filesystem::path& path, const FilterPipeline& fp) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& p : fp.layers()) {
    layers.push_back({{"sigma_x", p.sigma_x}, {"sigma_y", p.sigma_y}, {"sigma_z", p.sigma_z}, {"sigma_r", p.sigma_r}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << nlohmann::json{{"layers", layers}}.dump(2) << "\n";
}

FilterPipeline load_params(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open parameter file " + path.string());
  std::vector<SigmaParams> layers;
  try {
    nlohmann::json doc;
    is >> doc;
    for (const auto& l : doc.at("layers")) {
      layers.push_back({l.at("sigma_x").get<double>(), l.at("sigma_y").get<double>(), l.at("sigma_z").get<double>(),
                        l.at("sigma_r").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed parameter file " + path.string() + ": " + e.what());
  }
  return FilterPipeline(std::move(layers));
}

}  // namespace tbf
