#pragma once

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "bloch.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "output.hpp"
#include "resonance.hpp"

namespace hanle {

enum class Command { scan_b, sweep_eps, find_epsmax, solve_one };

inline Command parse_command(const std::string& name) {
  if (name == "scan-b") return Command::scan_b;
  if (name == "sweep-eps") return Command::sweep_eps;
  if (name == "find-epsmax") return Command::find_epsmax;
  if (name == "solve-one") return Command::solve_one;
  throw ConfigError("unknown command '" + name + "' (expected scan-b, sweep-eps, find-epsmax or solve-one)");
}

/// Process exit status for an exception escaping run_command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::domain_error*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e))
    return 2;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const ExtractionError*>(&e)) return 4;
  return 1;
}

struct RunResult {
  std::vector<std::filesystem::path> files;
  std::string summary;  // one line for the terminal
};

namespace run_detail {

inline std::filesystem::path output_path(const RunConfig& c, const std::string& suffix) {
  return std::filesystem::path(c.output.dir) / (c.output.prefix + suffix);
}

/// Collects files and commits them together, so a failure leaves no complete outputs.
class OutputSet {
 public:
  std::ostream& open(const std::filesystem::path& path) {
    files_.push_back(std::make_unique<AtomicFile>(path));
    return files_.back()->stream();
  }
  std::vector<std::filesystem::path> commit() {
    std::vector<std::filesystem::path> out;
    for (auto& f : files_) {
      f->commit();
      out.push_back(f->path());
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<AtomicFile>> files_;
};

inline void append(std::vector<std::filesystem::path>& to, const std::vector<std::filesystem::path>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

inline std::string eps_text(double e) { return config_detail::format_real(e); }

}  // namespace run_detail

/// Runs one command and writes its outputs into config.output.dir.
inline RunResult run_command(Command command, const RunConfig& config, int threads) {
  using namespace run_detail;
  std::filesystem::create_directories(config.output.dir);
  const FieldParams field = config.field();
  const bool plots = config.output.format == OutputFormat::both;
  if (const auto warn = config.atom.consistency_warning()) std::cerr << "warning: " << *warn << "\n";

  RunResult result;
  OutputSet out;
  std::ostringstream summary;
  summary << std::setprecision(10);

  switch (command) {
    case Command::scan_b: {
      const CentralScan scan = scan_central_structure(config.atom, field, config.doppler, config.scan, threads);
      std::ostream& os = out.open(output_path(config, "_curve.csv"));
      write_preamble(os, config, "scan-b", {describe(scan.params)});
      write_curve_csv(os, scan.curve);
      result.files = out.commit();
      if (plots) append(result.files, emit_plot_data(scan.curve, output_path(config, "_curve.dat")));
      summary << describe(scan.params);
      break;
    }
    case Command::sweep_eps: {
      const auto grid = config.sweep.grid();
      const EllipticitySweep sweep =
          sweep_ellipticity(config.atom, field, config.doppler, grid, config.scan, threads);
      bool any = false;
      for (const auto& p : sweep.params) any = any || p.found();
      if (!any) throw ExtractionError("no central structure found at any ellipticity");
      std::ostream& os = out.open(output_path(config, "_sweep.csv"));
      write_preamble(os, config, "sweep-eps", {"eps_max = " + eps_text(sweep.eps_max)});
      write_sweep_csv(os, sweep);
      result.files = out.commit();
      if (plots) append(result.files, emit_plot_data(sweep, output_path(config, "_sweep")));
      summary << "eps_max=" << sweep.eps_max << " over " << grid.size() << " ellipticities";
      break;
    }
    case Command::find_epsmax: {
      const EpsMaxResult r = find_eps_max(config.atom, field, config.doppler, config.scan, threads);
      if (!(r.amplitude_max > 0)) throw ExtractionError("no central structure found on the coarse ellipticity grid");
      std::ostream& os = out.open(output_path(config, "_epsmax.csv"));
      write_preamble(os, config, "find-epsmax");
      write_epsmax_csv(os, r);
      std::ostream& coarse = out.open(output_path(config, "_epsmax_coarse.csv"));
      write_preamble(coarse, config, "find-epsmax coarse scan");
      write_sweep_csv(coarse, r.coarse);
      result.files = out.commit();
      if (plots) append(result.files, emit_plot_data(r.coarse, output_path(config, "_epsmax_coarse")));
      summary << "eps_max=" << r.eps_max << " A(eps_max)=" << r.amplitude_max << " A(0)=" << r.amplitude_zero
              << " gain=" << r.gain << (r.multimodal ? " (multimodal)" : "");
      break;
    }
    case Command::solve_one: {
      const ZeemanParams z = zeeman_from_ground(config.solve.omega_g, config.atom);
      const DensityMatrixBlocks blocks = solve_steady(config.atom, field, config.solve.delta, z);
      const double s = absorption(blocks, config.atom, field);
      const double trace = blocks.rho_g.trace().real() + blocks.rho_e.trace().real();
      std::ostringstream rec;
      rec << std::setprecision(17) << "absorption = " << s << " trace = " << trace << " omega_e = " << z.omega_e;
      std::ostream& os = out.open(output_path(config, "_solve.csv"));
      write_preamble(os, config, "solve-one", {rec.str()});
      os << std::setprecision(17) << "delta,omega_g,omega_e,absorption,trace\n"
         << config.solve.delta << "," << z.omega_g << "," << z.omega_e << "," << s << "," << trace << "\n";
      std::ostream& dm = out.open(output_path(config, "_density.csv"));
      write_preamble(dm, config, "solve-one density matrix", {rec.str()});
      write_density_csv(dm, blocks, config.atom);
      result.files = out.commit();
      summary << std::setprecision(17) << "absorption=" << s;
      break;
    }
  }
  result.summary = summary.str();
  return result;
}

}  // namespace hanle
