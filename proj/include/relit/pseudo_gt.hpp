#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "relit/consistency.hpp"
#include "relit/handles.hpp"
#include "relit/io.hpp"
#include "relit/olat.hpp"
#include "relit/prefilter.hpp"
#include "relit/routing.hpp"

namespace relit {

struct PseudoGtRecord {
  std::string id;
  DomainTag tag = DomainTag::Curated;
  Teacher teacher = Teacher::Real;
  std::filesystem::path sidecar;
  nlohmann::json files;
};

class EvaluatorError : public std::runtime_error {
 public:
  EvaluatorError(const std::string& id, const std::string& what)
      : std::runtime_error("entry '" + id + "': " + what), id_(id) {}
  const std::string& entry_id() const { return id_; }

 private:
  std::string id_;
};

// Resolves the entry's "olat" file reference (relative to `base_dir`), then
// writes normals, albedo, light maps and the relit image as PFM under
// out_dir/<id>/ with a pseudo_gt.json sidecar naming the teacher. When
// `relighter` is null the entry's own OLAT superposition is used.
inline PseudoGtRecord emit_pseudo_gt(const DatasetEntry& entry, const std::filesystem::path& base_dir,
                                     const RoutingPlan& plan, const EnvironmentMap& env, const std::string& env_id,
                                     const std::filesystem::path& out_dir, std::uint64_t seed,
                                     const RelighterHandle* relighter = nullptr,
                                     const std::vector<double>& exponents = kDefaultExponents) {
  auto it = entry.files.find("olat");
  if (it == entry.files.end()) throw EvaluatorError(entry.id, "no 'olat' file reference to resolve");

  PseudoGtRecord rec;
  rec.id = entry.id;
  rec.tag = entry.tag;
  rec.teacher = plan.teacher(entry.tag);
  try {
    auto stack = std::make_shared<const OlatStack>(load_olat_stack(base_dir / it->second));
    auto ps = photometric_stereo(*stack);
    LinearImage albedo = flat_lit_albedo(*stack);
    PrefilteredEnv pf = prefilter(env, exponents);
    LinearImage diffuse = light_map_diffuse(ps.normals, pf, ps.valid);
    RelighterHandle own = make_olat_relighter(stack);
    const RelighterHandle& f = relighter ? *relighter : own;
    LinearImage relit = f(albedo, env);

    auto dir = out_dir / entry.id;
    std::filesystem::create_directories(dir);
    write_pfm(dir / "normals.pfm", ps.normals.encoded());
    write_pfm(dir / "albedo.pfm", albedo);
    write_pfm(dir / "light_diffuse.pfm", diffuse);
    write_pfm(dir / "relit.pfm", relit);
    write_pfm(dir / "mask.pfm", ps.valid.to_image());
    rec.files = {{"normals", "normals.pfm"},
                 {"albedo", "albedo.pfm"},
                 {"light_diffuse", "light_diffuse.pfm"},
                 {"relit", "relit.pfm"},
                 {"mask", "mask.pfm"}};
    nlohmann::json spec = nlohmann::json::array();
    for (std::size_t k = 0; k < pf.specular.size(); ++k) {
      std::string name = "light_specular_" + std::to_string(k) + ".pfm";
      write_pfm(dir / name, light_map_specular(ps.normals, pf, k, ps.valid));
      spec.push_back({{"exponent", pf.specular[k].exponent}, {"file", name}});
    }
    rec.files["light_specular"] = spec;

    nlohmann::json side = {{"id", entry.id},
                           {"tag", to_string(entry.tag)},
                           {"teacher", to_string(rec.teacher)},
                           {"env", env_id},
                           {"seed", seed},
                           {"files", rec.files}};
    rec.sidecar = dir / "pseudo_gt.json";
    std::ofstream(rec.sidecar) << side.dump(2) << '\n';
  } catch (const EvaluatorError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluatorError(entry.id, e.what());
  }
  return rec;
}

}  // namespace relit
