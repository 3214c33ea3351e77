#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "relit/consistency.hpp"
#include "relit/io.hpp"
#include "relit/olat.hpp"

namespace relit {

// Relights the stored reflectance field; the input image only fixes the size.
inline RelighterHandle make_olat_relighter(std::shared_ptr<const OlatStack> stack) {
  return {[stack](const LinearImage&, const EnvironmentMap& env) { return relight_superposition(*stack, env); }, true};
}

inline AlbedoEstimatorHandle make_identity_albedo() {
  return {[](const LinearImage& img) { return img; }, true};
}

// Returns a fixed albedo regardless of input, e.g. generator ground truth.
inline AlbedoEstimatorHandle make_oracle_albedo(LinearImage albedo) {
  return {[albedo = std::move(albedo)](const LinearImage&) { return albedo; }, true};
}

inline AlbedoEstimatorHandle make_flat_lit_albedo(std::shared_ptr<const OlatStack> stack) {
  return make_oracle_albedo(flat_lit_albedo(*stack));
}

// Divides by the image's mean; invariant to global gain.
inline AlbedoEstimatorHandle make_mean_normalized_albedo() {
  return {[](const LinearImage& img) {
            double m = masked_mean(img, nullptr);
            return m > 0.0 ? scaled(img, static_cast<float>(0.5 / m)) : img;
          },
          true};
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

inline std::filesystem::path scratch_path(const std::string& stem, const std::string& ext) {
  static std::atomic<unsigned> counter{0};
  auto dir = std::filesystem::temp_directory_path();
  return dir / (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ext);
}

inline void run_evaluator(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw std::runtime_error("evaluator failed: " + cmd);
}

struct ScratchFiles {
  std::vector<std::filesystem::path> paths;
  ~ScratchFiles() {
    std::error_code ec;
    for (const auto& p : paths) std::filesystem::remove(p, ec);
  }
};

}  // namespace detail

// External relighter: `<cmd> <in.pfm> <env.hdr> <out.pfm>`; non-zero exit is failure.
inline RelighterHandle make_subprocess_relighter(std::string cmd) {
  return {[cmd](const LinearImage& img, const EnvironmentMap& env) {
            detail::ScratchFiles tmp;
            auto in = detail::scratch_path("relit_in", ".pfm");
            auto ep = detail::scratch_path("relit_env", ".hdr");
            auto out = detail::scratch_path("relit_out", ".pfm");
            tmp.paths = {in, ep, out};
            write_pfm(in, img);
            write_hdr(ep, env.image());
            detail::run_evaluator(cmd + " " + detail::shell_quote(in.string()) + " " + detail::shell_quote(ep.string()) +
                                  " " + detail::shell_quote(out.string()));
            return read_pfm(out);
          },
          true};
}

// External albedo estimator: `<cmd> <in.pfm> <out.pfm>`.
inline AlbedoEstimatorHandle make_subprocess_albedo(std::string cmd) {
  return {[cmd](const LinearImage& img) {
            detail::ScratchFiles tmp;
            auto in = detail::scratch_path("albedo_in", ".pfm");
            auto out = detail::scratch_path("albedo_out", ".pfm");
            tmp.paths = {in, out};
            write_pfm(in, img);
            detail::run_evaluator(cmd + " " + detail::shell_quote(in.string()) + " " + detail::shell_quote(out.string()));
            return read_pfm(out);
          },
          true};
}

}  // namespace relit
