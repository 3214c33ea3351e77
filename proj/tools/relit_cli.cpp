// relit: command-line front end for the relighting and degradation toolkit.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "relit/relit.hpp"
#include "relit/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relit;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

std::string lower_ext(const fs::path& p) {
  auto e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

void write_image(const fs::path& p, const LinearImage& linear) {
  if (lower_ext(p) == ".png")
    write_png(p, gamma_encode(linear));
  else
    write_pfm(p, linear);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "builtin:olat=<manifest>" and "builtin:ambient"; anything else is a command.
RelighterHandle make_relighter(const std::string& spec) {
  if (spec.rfind("builtin:olat=", 0) == 0) {
    auto stack = std::make_shared<const OlatStack>(load_olat_stack(spec.substr(13)));
    return make_olat_relighter(stack);
  }
  if (spec == "builtin:ambient") {
    // Scales the input by the environment's mean radiance.
    return {[](const LinearImage& img, const EnvironmentMap& env) {
              double sum = 0.0, area = 0.0;
              for (int y = 0; y < env.height(); ++y) {
                double dw = texel_solid_angle(env, y);
                for (int x = 0; x < env.width(); ++x) {
                  sum += dw * env.texel(x, y).mean();
                  area += dw;
                }
              }
              return scaled(img, static_cast<float>(sum / area));
            },
            true};
  }
  if (spec.rfind("builtin:", 0) == 0) throw std::invalid_argument("unknown builtin relighter " + spec);
  return make_subprocess_relighter(spec);
}

// "builtin:identity", "builtin:normalize", "builtin:flatlit=<manifest>"; else a command.
AlbedoEstimatorHandle make_albedo(const std::string& spec) {
  if (spec == "builtin:identity") return make_identity_albedo();
  if (spec == "builtin:normalize") return make_mean_normalized_albedo();
  if (spec.rfind("builtin:flatlit=", 0) == 0)
    return make_flat_lit_albedo(std::make_shared<const OlatStack>(load_olat_stack(spec.substr(16))));
  if (spec.rfind("builtin:", 0) == 0) throw std::invalid_argument("unknown builtin albedo estimator " + spec);
  return make_subprocess_albedo(spec);
}

std::string resolution_label(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relit: OLAT relighting, environment prefiltering and camera degradation toolkit"};
  app.require_subcommand(1);

  // prefilter ---------------------------------------------------------------
  auto* pre = app.add_subcommand("prefilter", "Pre-convolve an environment map into diffuse and specular tables");
  std::string pre_env, pre_out, pre_exps = "1,16,32,64";
  int pre_height = kDefaultPrefilterHeight;
  double pre_yaw = 0.0;
  pre->add_option("--env", pre_env, "Environment map (.hdr or .pfm)")->required();
  pre->add_option("--exponents", pre_exps, "Comma-separated Phong exponents");
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--height", pre_height, "Output table height");
  pre->add_option("--yaw", pre_yaw, "Rotate the environment first (radians)");

  // relight -----------------------------------------------------------------
  auto* rel = app.add_subcommand("relight", "Relight an OLAT stack under an environment map");
  std::string rel_olat, rel_env, rel_out;
  double rel_yaw = 0.0, rel_exposure = 1.0;
  rel->add_option("--olat", rel_olat, "OLAT manifest")->required();
  rel->add_option("--env", rel_env, "Environment map")->required();
  rel->add_option("--yaw", rel_yaw, "Environment yaw (radians)");
  rel->add_option("--exposure", rel_exposure, "Linear exposure multiplier");
  rel->add_option("--out", rel_out, "Output .pfm (linear) or .png (gamma encoded)")->required();

  // olat-fit ----------------------------------------------------------------
  auto* fit = app.add_subcommand("olat-fit", "Recover normals (photometric stereo) and albedo from an OLAT stack");
  std::string fit_olat, fit_normals, fit_albedo, fit_source = "flat", fit_valid;
  double fit_threshold = kDefaultShadowThreshold;
  fit->add_option("--olat", fit_olat, "OLAT manifest")->required();
  fit->add_option("--out-normals", fit_normals, "Normals PFM (remapped to [0,1])")->required();
  fit->add_option("--out-albedo", fit_albedo, "Albedo PFM")->required();
  fit->add_option("--albedo-source", fit_source, "flat (flat-lit) or ps (photometric stereo)")
      ->check(CLI::IsMember({"flat", "ps"}));
  fit->add_option("--shadow-threshold", fit_threshold, "Fraction of per-pixel peak below which lights are ignored");
  fit->add_option("--out-valid", fit_valid, "Optional validity mask PFM");

  // augment -----------------------------------------------------------------
  auto* aug = app.add_subcommand("augment", "Apply the camera degradation model to a linear image");
  std::string aug_in, aug_config, aug_out, aug_mask;
  std::uint64_t aug_seed = 0;
  bool aug_pair = false;
  aug->add_option("--in", aug_in, "Linear input PFM")->required();
  aug->add_option("--config", aug_config, "DegradeConfig JSON")->required();
  aug->add_option("--seed", aug_seed, "RNG seed")->required();
  aug->add_option("--out", aug_out, "Output PNG")->required();
  aug->add_option("--mask", aug_mask, "Optional foreground mask PFM");
  aug->add_flag("--pair", aug_pair, "Emit a teacher/student pair (<stem>_teacher.png next to --out)");

  // consist -----------------------------------------------------------------
  auto* con = app.add_subcommand("consist", "Evaluate the albedo consistency losses");
  std::string con_rel, con_alb, con_img, con_envs, con_mask;
  double con_gain = 1.5, con_contrast = 0.8, con_wenv = 25.0, con_wamb = 500.0;
  con->add_option("--relighter", con_rel, "Command or builtin:olat=<manifest> | builtin:ambient")->required();
  con->add_option("--albedo", con_alb, "Command or builtin:identity | builtin:normalize | builtin:flatlit=<manifest>")
      ->required();
  con->add_option("--image", con_img, "Input PFM")->required();
  con->add_option("--envs", con_envs, "Two environment maps, comma separated")->required();
  con->add_option("--mask", con_mask, "Foreground mask PFM")->required();
  con->add_option("--gain", con_gain, "Brightness gain of the ambient transform");
  con->add_option("--contrast", con_contrast, "Contrast of the ambient transform");
  con->add_option("--lambda-env", con_wenv, "Weight of the environment term");
  con->add_option("--lambda-amb", con_wamb, "Weight of the ambient term");

  // metrics -----------------------------------------------------------------
  auto* met = app.add_subcommand("metrics", "Masked MSE / PSNR / SSIM in the display domain");
  std::string met_a, met_b, met_mask;
  bool met_json = false;
  met->add_option("--a", met_a, "Image A (.png display, or .pfm linear)")->required();
  met->add_option("--b", met_b, "Image B")->required();
  met->add_option("--mask", met_mask, "Foreground mask PFM")->required();
  met->add_flag("--json", met_json, "Emit JSON");

  // synthgen ----------------------------------------------------------------
  auto* syn = app.add_subcommand("synthgen", "Render an analytic sphere scene: OLAT stack plus ground truth");
  std::string syn_spec, syn_out, syn_env;
  int syn_lights = 164;
  syn->add_option("--spec", syn_spec, "Scene JSON")->required();
  syn->add_option("--lights", syn_lights, "Number of near-uniform light directions")->required();
  syn->add_option("--out", syn_out, "Output directory")->required();
  syn->add_option("--env", syn_env, "Also write a brute-force reference render under this environment");

  // make-env ----------------------------------------------------------------
  auto* menv = app.add_subcommand("make-env", "Write an analytic environment map");
  std::string menv_kind = "sun_sky", menv_out, menv_params = "{}";
  menv->add_option("--kind", menv_kind, "constant | sun_sky | hot_texel")
      ->check(CLI::IsMember({"constant", "sun_sky", "hot_texel"}));
  menv->add_option("--params", menv_params, "JSON parameters");
  menv->add_option("--out", menv_out, "Output .hdr or .pfm")->required();

  // route -------------------------------------------------------------------
  auto* rt = app.add_subcommand("route", "Compose domain-routed batches");
  std::string rt_manifest, rt_plan, rt_emit, rt_env;
  std::uint64_t rt_seed = 0;
  int rt_batches = 0;
  rt->add_option("--manifest", rt_manifest, "Dataset manifest JSON")->required();
  rt->add_option("--plan", rt_plan, "Routing plan JSON")->required();
  rt->add_option("--seed", rt_seed, "Shuffle seed")->required();
  rt->add_option("--batches", rt_batches, "Number of batches (default: one epoch)");
  rt->add_option("--emit-dir", rt_emit, "Write pseudo ground truth for every routed entry here");
  rt->add_option("--env", rt_env, "Environment used when emitting pseudo ground truth");

  // bench -------------------------------------------------------------------
  auto* bn = app.add_subcommand("bench", "Latency benchmark of a pipeline operation");
  std::string bn_op = "relight";
  int bn_res = 512, bn_iters = 200, bn_warmup = 20, bn_lights = 164;
  bool bn_json = false;
  bn->add_option("--op", bn_op, "noop | relight | prefilter | degrade | photometric-stereo | ssim | light-maps")
      ->check(CLI::IsMember({"noop", "relight", "prefilter", "degrade", "photometric-stereo", "ssim", "light-maps"}));
  bn->add_option("--res", bn_res, "Square resolution");
  bn->add_option("--iters", bn_iters, "Timed iterations");
  bn->add_option("--warmup", bn_warmup, "Discarded warmup iterations");
  bn->add_option("--lights", bn_lights, "LED count for OLAT operations");
  bn->add_flag("--json", bn_json, "Emit JSON instead of a table");

  // serve -------------------------------------------------------------------
  auto* sv = app.add_subcommand("serve", "Serve relit frames over HTTP for the viewer");
  std::string sv_assets, sv_host = "0.0.0.0", sv_static;
  std::uint16_t sv_port = 8080;
  sv->add_option("--assets", sv_assets, "Asset directory")->required();
  sv->add_option("--port", sv_port, "TCP port");
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--static", sv_static, "Optional directory served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      std::vector<double> exps;
      for (const auto& s : split(pre_exps, ',')) exps.push_back(std::stod(s));
      EnvironmentMap env = read_env(pre_env);
      if (pre_yaw != 0.0) env = rotate_env(env, pre_yaw);
      PrefilterOptions opts;
      opts.out_height = pre_height;
      save_prefiltered(pre_out, prefilter(env, exps, opts, pre_yaw));
      std::cout << "wrote " << pre_out << '\n';
    } else if (*rel) {
      OlatManifest m = read_olat_manifest(rel_olat);
      LinearImage img = relight_streamed(m, read_env(rel_env), yaw_matrix(rel_yaw));
      if (rel_exposure != 1.0) img = scaled(img, static_cast<float>(rel_exposure));
      write_image(rel_out, img);
    } else if (*fit) {
      OlatStack stack = load_olat_stack(fit_olat);
      auto ps = photometric_stereo(stack, fit_threshold);
      write_pfm(fit_normals, ps.normals.encoded());
      write_pfm(fit_albedo, fit_source == "ps" ? ps.albedo : flat_lit_albedo(stack));
      if (!fit_valid.empty()) write_pfm(fit_valid, ps.valid.to_image());
    } else if (*aug) {
      DegradeConfig cfg = degrade_config_from_json(read_json(aug_config));
      LinearImage in = to_rgb(read_pfm(aug_in));
      Rng rng(aug_seed);
      fs::path out(aug_out);
      json sidecar;
      sidecar["seed"] = aug_seed;
      sidecar["config"] = to_json(cfg);
      if (aug_pair) {
        DegradeSample sample{in, std::nullopt};
        if (!aug_mask.empty()) sample.mask = read_mask(aug_mask);
        AsymmetricPair pair = asymmetric_pair(sample, cfg, rng);
        write_png(out, pair.student);
        fs::path teacher = out.parent_path() / (out.stem().string() + "_teacher.png");
        write_png(teacher, gamma_encode(pair.teacher, cfg.gamma));
        sidecar["record"] = to_json(pair.record);
        sidecar["teacher"] = teacher.filename().string();
      } else {
        DegradeResult r = composite_degrade(in, cfg, rng);
        write_png(out, r.display);
        sidecar["record"] = to_json(r.record);
      }
      write_json(fs::path(aug_out + ".json"), sidecar);
    } else if (*con) {
      auto envs = split(con_envs, ',');
      if (envs.size() != 2) throw std::invalid_argument("--envs needs exactly two maps");
      LinearImage img = to_rgb(read_pfm(con_img));
      Mask mask = read_mask(con_mask);
      RelighterHandle f = make_relighter(con_rel);
      AlbedoEstimatorHandle fa = make_albedo(con_alb);
      EnvironmentMap e1 = read_env(envs[0]);
      EnvironmentMap e2 = read_env(envs[1]);
      double le = l_env(f, fa, img, e1, e2, mask);
      double la = l_amb(fa, img, con_gain, con_contrast, mask);
      ConsistencyWeights w{con_wenv, con_wamb};
      std::cout << json{{"l_env", le}, {"l_amb", la}, {"l_consist", l_consist(le, la, w)},
                        {"lambda_env", w.env}, {"lambda_amb", w.amb}}
                       .dump(2)
                << '\n';
    } else if (*met) {
      LinearImage a = read_display_image(met_a);
      LinearImage b = read_display_image(met_b);
      if (a.channels() != b.channels()) {
        a = to_rgb(a);
        b = to_rgb(b);
      }
      MetricReport r = evaluate_metrics(a, b, read_mask(met_mask));
      if (met_json) {
        std::cout << to_json(r).dump(2) << '\n';
      } else {
        std::printf("%-10s %10s %10s %10s\n", "pixels", "MSE", "PSNR(dB)", "SSIM");
        std::printf("%-10.0f %10.6f %10.3f %10.4f\n", r.pixel_count, r.mse, r.psnr, r.ssim);
      }
    } else if (*syn) {
      SceneSpec scene = scene_from_json(read_json(syn_spec));
      fs::path out(syn_out);
      auto dirs = fibonacci_sphere(syn_lights);
      OlatStack stack = render_olat(scene, dirs, out.filename().string());
      save_olat_stack(out, stack);
      Intrinsics gt = render_intrinsics(scene);
      write_pfm(out / "normals_gt.pfm", gt.normals.encoded());
      write_pfm(out / "albedo_gt.pfm", gt.albedo);
      if (!syn_env.empty()) write_pfm(out / "reference.pfm", render_env_reference(scene, read_env(syn_env)));
      std::cout << "wrote " << (out / "manifest.json").string() << '\n';
    } else if (*menv) {
      EnvironmentMap env = make_env(menv_kind, json::parse(menv_params));
      if (lower_ext(menv_out) == ".pfm")
        write_pfm(menv_out, env.image());
      else
        write_hdr(menv_out, env.image());
    } else if (*rt) {
      DatasetManifest manifest = dataset_manifest_from_json(read_json(rt_manifest));
      RoutingPlan plan = routing_plan_from_json(read_json(rt_plan));
      auto batches = route_batches(manifest, plan, rt_seed, rt_batches);
      json out = {{"seed", rt_seed}, {"batch_size", plan.batch_size}, {"batches", to_json(batches)}};
      if (!rt_emit.empty()) {
        if (rt_env.empty()) throw std::invalid_argument("--emit-dir requires --env");
        EnvironmentMap env = read_env(rt_env);
        fs::path base = fs::path(rt_manifest).parent_path();
        std::map<std::string, const DatasetEntry*> by_id;
        for (const auto& e : manifest.entries) by_id[e.id] = &e;
        json emitted = json::array();
        std::set<std::string> done;
        for (const auto& b : batches)
          for (const auto& it : b.items) {
            if (!done.insert(it.id).second) continue;
            auto rec = emit_pseudo_gt(*by_id.at(it.id), base, plan, env, fs::path(rt_env).stem().string(), rt_emit,
                                      rt_seed);
            emitted.push_back(rec.sidecar.string());
          }
        out["emitted"] = emitted;
      }
      std::cout << out.dump(2) << '\n';
    } else if (*bn) {
      SceneSpec scene;
      scene.width = scene.height = bn_res;
      scene.spheres.push_back({bn_res / 2.0, bn_res / 2.0, 10.0, bn_res * 0.45, Rgb(0.8, 0.6, 0.5), 0.2, 32.0});
      EnvironmentMap env = make_sun_sky_env(64);
      std::function<void()> op;
      std::shared_ptr<OlatStack> stack;
      LinearImage sink;
      if (bn_op == "relight" || bn_op == "photometric-stereo")
        stack = std::make_shared<OlatStack>(render_olat(scene, fibonacci_sphere(bn_lights)));
      if (bn_op == "noop") {
        op = [] {};
      } else if (bn_op == "relight") {
        op = [&] { sink = relight_superposition(*stack, env); };
      } else if (bn_op == "photometric-stereo") {
        op = [&] { sink = photometric_stereo(*stack).albedo; };
      } else if (bn_op == "prefilter") {
        op = [&] { sink = prefilter(env).diffuse; };
      } else if (bn_op == "light-maps") {
        auto gt = render_intrinsics(scene);
        auto pf = std::make_shared<PrefilteredEnv>(prefilter(env));
        op = [&, gt, pf] {
          sink = light_map_diffuse(gt.normals, *pf, gt.mask);
          for (std::size_t k = 0; k < pf->specular.size(); ++k) sink = light_map_specular(gt.normals, *pf, k, gt.mask);
        };
      } else if (bn_op == "degrade") {
        auto gt = render_intrinsics(scene);
        DegradeConfig cfg = DegradeConfig::all_on();
        std::uint64_t i = 0;
        op = [&, gt, cfg] {
          Rng rng(derive_seed(7, i++));
          sink = composite_degrade(gt.albedo, cfg, rng).display;
        };
      } else if (bn_op == "ssim") {
        auto gt = render_intrinsics(scene);
        op = [&, gt] { sink.storage().assign(1, static_cast<float>(ssim_masked(gt.albedo, gt.albedo, gt.mask))); };
      }
      BenchReport r = bench(op, bn_op, resolution_label(bn_res, bn_res), bn_iters, bn_warmup);
      if (bn_json)
        std::cout << to_json(r).dump(2) << '\n';
      else
        std::cout << format_bench_table({r});
    } else if (*sv) {
      RelightService service(sv_assets);
      httplib::Server srv;
      service.mount(srv);
      if (!sv_static.empty() && !srv.set_mount_point("/", sv_static))
        throw IoError("cannot serve static directory " + sv_static);
      std::cout << "serving " << service.subjects().size() << " subjects, " << service.envs().size()
                << " envs on " << sv_host << ":" << sv_port << std::endl;
      if (!srv.listen(sv_host, sv_port)) throw std::runtime_error("cannot listen on port " + std::to_string(sv_port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
