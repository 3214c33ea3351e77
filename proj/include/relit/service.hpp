#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "relit/color.hpp"
#include "relit/degrade.hpp"
#include "relit/io.hpp"
#include "relit/olat.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that
// collides with Eigen parameter names.
#include <httplib.h>

namespace relit {

// Read-only HTTP service over a preloaded asset directory:
//   <assets>/subjects/<id>/manifest.json   OLAT manifests
//   <assets>/envs/<id>.hdr | <id>.pfm      environment maps
//   <assets>/degrade.json                  optional student-side config
class RelightService {
 public:
  class NotFound : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  explicit RelightService(const std::filesystem::path& assets) { load(assets); }

  const std::map<std::string, std::shared_ptr<const OlatStack>>& subjects() const { return subjects_; }
  const std::map<std::string, std::shared_ptr<const EnvironmentMap>>& envs() const { return envs_; }

  static double normalize_yaw(double yaw) {
    double y = std::fmod(yaw, kTwoPi);
    if (y < 0.0) y += kTwoPi;
    return y;
  }

  // Linear relit frame scaled by exposure, before gamma.
  LinearImage relight_linear(const std::string& subject, const std::string& env, double yaw, double exposure) const {
    if (!(exposure > 0.0) || !std::isfinite(exposure)) throw std::invalid_argument("exposure must be positive");
    if (!std::isfinite(yaw)) throw std::invalid_argument("yaw must be finite");
    const auto& s = find(subjects_, subject, "subject");
    const auto& e = find(envs_, env, "env");
    LinearImage img = relight_superposition(*s, *e, normalize_yaw(yaw));
    if (exposure != 1.0)
      for (float& v : img.data()) v = static_cast<float>(v * exposure);
    return img;
  }

  std::string relight_png(const std::string& subject, const std::string& env, double yaw, double exposure) const {
    return encode_png(gamma_encode(relight_linear(subject, env, yaw, exposure)));
  }

  // Student-side view of the asymmetric pair for the relit frame.
  std::string degrade_preview_png(const std::string& subject, const std::string& env, double yaw,
                                  std::uint64_t seed) const {
    LinearImage img = relight_linear(subject, env, yaw, 1.0);
    Rng rng(seed);
    DegradeSample sample{img, subjects_.at(subject)->mask};
    return encode_png(asymmetric_pair(sample, degrade_config_, rng).student);
  }

  void mount(httplib::Server& srv) const {
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"status", "ok"}}.dump(), "application/json");
    });
    srv.Get("/subjects", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& [id, s] : subjects_) out.push_back({{"id", id}, {"resolution", {s->width(), s->height()}}});
      res.set_content(out.dump(), "application/json");
    });
    srv.Get("/envs", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& [id, e] : envs_) out.push_back({{"id", id}});
      res.set_content(out.dump(), "application/json");
    });
    srv.Get("/relight", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] {
        return relight_png(required(req, "subject"), required(req, "env"), number(req, "yaw", 0.0),
                           number(req, "exposure", 1.0));
      });
    });
    srv.Get("/degrade-preview", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&] {
        std::uint64_t seed = 0;
        if (req.has_param("seed")) {
          try {
            seed = std::stoull(req.get_param_value("seed"));
          } catch (const std::exception&) {
            throw std::invalid_argument("seed must be an unsigned integer");
          }
        }
        return degrade_preview_png(required(req, "subject"), required(req, "env"), number(req, "yaw", 0.0), seed);
      });
    });
  }

 private:
  template <class T>
  static const std::shared_ptr<const T>& find(const std::map<std::string, std::shared_ptr<const T>>& m,
                                              const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw NotFound(std::string("unknown ") + what + " '" + id + "'");
    return it->second;
  }

  static std::string required(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) throw std::invalid_argument(std::string("missing parameter '") + key + "'");
    return req.get_param_value(key);
  }

  static double number(const httplib::Request& req, const char* key, double def) {
    if (!req.has_param(key)) return def;
    try {
      std::size_t used = 0;
      std::string v = req.get_param_value(key);
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("parameter '") + key + "' is not a number");
    }
  }

  template <class Fn>
  static void handle(httplib::Response& res, Fn&& fn) {
    try {
      res.set_content(fn(), "image/png");
    } catch (const NotFound& e) {
      res.status = 404;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::invalid_argument& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  }

  void load(const std::filesystem::path& assets) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(assets)) throw IoError("asset directory not found: " + assets.string());
    if (fs::is_directory(assets / "subjects"))
      for (const auto& d : fs::directory_iterator(assets / "subjects")) {
        auto manifest = d.path() / "manifest.json";
        if (!fs::exists(manifest)) continue;
        subjects_[d.path().filename().string()] = std::make_shared<const OlatStack>(load_olat_stack(manifest));
      }
    if (fs::is_directory(assets / "envs"))
      for (const auto& f : fs::directory_iterator(assets / "envs")) {
        auto ext = f.path().extension().string();
        if (ext != ".hdr" && ext != ".pfm") continue;
        envs_[f.path().stem().string()] = std::make_shared<const EnvironmentMap>(read_env(f.path()));
      }
    if (fs::exists(assets / "degrade.json")) {
      std::ifstream in(assets / "degrade.json");
      degrade_config_ = degrade_config_from_json(nlohmann::json::parse(in));
    }
  }

  std::map<std::string, std::shared_ptr<const OlatStack>> subjects_;
  std::map<std::string, std::shared_ptr<const EnvironmentMap>> envs_;
  DegradeConfig degrade_config_;
};

}  // namespace relit
