// Command-line front end: pairing queries, protocol runs, causality
// checks, outcome sampling, and the lattice tools.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "qfup/errors.hpp"
#include "qfup/protocol.hpp"

namespace {

using namespace qfup;

void apply_env() {
  if (const char* wd = std::getenv("QFUP_WORKDIR"); wd && *wd)
    std::filesystem::current_path(wd);
#ifdef _OPENMP
  if (const char* th = std::getenv("QFUP_THREADS"); th && *th) {
    const int n = std::atoi(th);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

std::vector<double> parse_sweep_arg(const std::string& s) {
  const auto c1 = s.find(':');
  const auto c2 = s.rfind(':');
  if (c1 == std::string::npos || c2 == c1)
    throw Error("--sweep format is LO:HI:STEP");
  const double lo = std::stod(s.substr(0, c1));
  const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  const double step = std::stod(s.substr(c2 + 1));
  if (!(step > 0.0) || hi < lo) throw Error("--sweep needs LO <= HI, STEP > 0");
  std::vector<double> out;
  for (double v = lo; v <= hi + 1e-12 * (1.0 + step); v += step)
    out.push_back(v);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  os << text;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

Lattice lattice_for(const ProtocolSpec& spec, std::optional<double> dx_opt,
                    const std::optional<Rect>& win_opt) {
  const double dx = dx_opt.value_or(spec.field.lattice_dx);
  Rect win;
  if (win_opt)
    win = *win_opt;
  else if (spec.field.lattice_window)
    win = *spec.field.lattice_window;
  else
    win = default_lattice_window(spec, dx);
  return make_lattice(win, dx);
}

int cmd_delta(const std::string& spec_path, const std::string& fa,
              const std::string& fb) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  BuiltProtocol bp = build_protocol(spec);
  const int ia = bp.table->find(fa), ib = bp.table->find(fb);
  if (ia < 0) throw Error("unknown function '" + fa + "'");
  if (ib < 0) throw Error("unknown function '" + fb + "'");
  std::printf("%.17g\n", bp.table->delta(ia, ib));
  return 0;
}

int cmd_run(const std::string& spec_path, const std::string& sweep_arg,
            const std::string& out_path) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  std::optional<std::vector<double>> sweep;
  if (!sweep_arg.empty()) sweep = parse_sweep_arg(sweep_arg);
  RunResult res = run_protocol(spec, sweep);
  emit(out_path, res.csv());
  return 0;
}

int cmd_check(const std::string& spec_path) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  CheckResult res = check_protocol(spec);
  std::cout << res.to_text();
  return res.overall == SupportVerdict::acausal ? 2 : 0;
}

int cmd_sample(const std::string& spec_path, int n, std::uint64_t seed,
               const std::string& out_path) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  emit(out_path, sample_protocol_csv(spec, n, seed));
  return 0;
}

int cmd_move(const std::string& spec_path, const std::string& out_override) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  if (!spec.move.present) throw Error("spec has no [move] section");
  const FunctionDef* f = find_function(spec, spec.move.function);
  if (f == nullptr) throw Error("unknown function in [move]");
  const Lattice lat =
      lattice_for(spec, spec.move.lattice_dx, spec.move.lattice_window);
  WindowSpec w{spec.move.t1, spec.move.t2};
  SampledFunction g = move_support(f->fn, spec.field.mass, lat, w);
  const Rect s = g.support();
  std::printf("moved %s: support t [%g, %g] x [%g, %g], %d x %d nodes\n",
              spec.move.function.c_str(), s.t_lo, s.t_hi, s.x_lo, s.x_hi, g.nt,
              g.nx);
  const std::string out = out_override.empty() ? spec.move.out : out_override;
  if (!out.empty()) {
    write_sampled_file(out, g);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

int cmd_scatter(const std::string& spec_path, const std::string& out_override) {
  ProtocolSpec spec = parse_protocol_file(spec_path);
  if (!spec.scatter.present) throw Error("spec has no [scatter] section");
  const ScatterSpec& sc = spec.scatter;
  const FunctionDef* f = find_function(spec, sc.function);
  if (f == nullptr) throw Error("unknown function in [scatter]");
  const Lattice lat = lattice_for(spec, sc.lattice_dx, sc.lattice_window);
  WindowSpec w{sc.t1, sc.t2};
  InteractionSpec inter{sc.kappa, sc.chi};
  ScatterResult res =
      scatter_first_order(f->fn, spec.field.mass, lat, inter, w);
  const Rect s = res.h.support();
  std::printf(
      "scattered %s: kappa %g, support t [%g, %g] x [%g, %g], %d x %d "
      "nodes\n",
      sc.function.c_str(), sc.kappa, s.t_lo, s.t_hi, s.x_lo, s.x_hi, res.h.nt,
      res.h.nx);
  if (!sc.target.empty()) {
    const FunctionDef* g = find_function(spec, sc.target);
    if (g == nullptr) throw Error("unknown target in [scatter]");
    const double eff = effective_delta(res.h, g->fn, spec.field.mass,
                                       spec.field.quad);
    const double free_val = delta_bilinear(f->fn, g->fn,
                                           DeltaKernel{spec.field.mass},
                                           spec.field.quad);
    std::printf("effective pairing with %s = %.12g (free value %.12g)\n",
                sc.target.c_str(), eff, free_val);
  }
  const std::string out = out_override.empty() ? sc.out : out_override;
  if (!out.empty()) {
    write_sampled_file(out, res.h);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"state-update maps for a real scalar field on a 1+1 lattice "
               "of spacetime regions"};
  app.require_subcommand(1);

  std::string spec_path, name_a, name_b, sweep_arg, out_path;
  int n = 1000;
  std::uint64_t seed = 1;

  auto* delta = app.add_subcommand("delta", "print the pairing of two functions");
  delta->add_option("spec", spec_path, "protocol file")->required();
  delta->add_option("f", name_a, "first function")->required();
  delta->add_option("g", name_b, "second function")->required();

  auto* run = app.add_subcommand("run", "sweep the readout expectation");
  run->add_option("spec", spec_path, "protocol file")->required();
  run->add_option("--sweep", sweep_arg, "LO:HI:STEP override");
  run->add_option("--out", out_path, "write CSV here instead of stdout");

  auto* check = app.add_subcommand("check", "audit the protocol's causality");
  check->add_option("spec", spec_path, "protocol file")->required();

  auto* sample = app.add_subcommand("sample", "draw measurement outcomes");
  sample->add_option("spec", spec_path, "protocol file")->required();
  sample->add_option("--n", n, "number of samples")->required();
  sample->add_option("--seed", seed, "random stream seed");
  sample->add_option("--out", out_path, "write CSV here instead of stdout");

  auto* move = app.add_subcommand("move-support", "repackage a function's source");
  move->add_option("spec", spec_path, "protocol file")->required();
  move->add_option("--out", out_path, "override the [move] out path");

  auto* scatter = app.add_subcommand("scatter", "first-order interacting source");
  scatter->add_option("spec", spec_path, "protocol file")->required();
  scatter->add_option("--out", out_path, "override the [scatter] out path");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_env();
    if (delta->parsed()) return cmd_delta(spec_path, name_a, name_b);
    if (run->parsed()) return cmd_run(spec_path, sweep_arg, out_path);
    if (check->parsed()) return cmd_check(spec_path);
    if (sample->parsed()) return cmd_sample(spec_path, n, seed, out_path);
    if (move->parsed()) return cmd_move(spec_path, out_path);
    if (scatter->parsed()) return cmd_scatter(spec_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
