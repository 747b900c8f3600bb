#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "resonance.hpp"

namespace hanle {

/// Writes to path.partial and renames onto path on commit(). An uncommitted file is removed.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)), partial_(path_) {
    partial_ += ".partial";
    out_.open(partial_, std::ios::out | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + partial_.string());
    out_ << std::setprecision(17);
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(partial_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for " + partial_.string());
    out_.close();
    std::filesystem::rename(partial_, path_);
    committed_ = true;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::filesystem::path partial_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Comment preamble: the full parameter record, one '#'-prefixed line each.
inline void write_preamble(std::ostream& os, const RunConfig& config, const std::string& title,
                           const std::vector<std::string>& extra = {}) {
  os << "# hanle-sim " << title << "\n";
  os << write_config(config, "# ");
  for (const auto& line : extra) os << "# " << line << "\n";
}

inline std::string describe(const ResonanceParams& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (!p.found()) {
    os << "central structure: none (" << p.note << ")";
    return os.str();
  }
  os << "central structure: sign=" << to_string(p.sign) << " amplitude=" << p.amplitude << " width=" << p.width
     << " ratio=" << p.ratio << " background=" << p.background << " background_at_zero=" << p.background_at_zero;
  return os.str();
}

inline void write_curve_csv(std::ostream& os, const ResonanceCurve& curve) {
  os << std::setprecision(17) << "omega_g,signal\n";
  for (std::size_t i = 0; i < curve.omega_g.size(); ++i) os << curve.omega_g[i] << "," << curve.signal[i] << "\n";
}

inline void write_sweep_csv(std::ostream& os, const EllipticitySweep& sweep) {
  os << std::setprecision(17) << "epsilon,amplitude,width,ratio,sign\n";
  for (std::size_t i = 0; i < sweep.epsilons.size(); ++i) {
    const auto& p = sweep.params[i];
    os << sweep.epsilons[i] << "," << p.amplitude << "," << p.width << "," << p.ratio << "," << to_string(p.sign)
       << "\n";
  }
}

inline void write_epsmax_csv(std::ostream& os, const EpsMaxResult& r) {
  os << std::setprecision(17) << "eps_max,amplitude_max,amplitude_zero,gain,multimodal\n";
  os << r.eps_max << "," << r.amplitude_max << "," << r.amplitude_zero << "," << r.gain << ","
     << (r.multimodal ? 1 : 0) << "\n";
}

/// Element tables of the three density-matrix blocks.
inline void write_density_csv(std::ostream& os, const DensityMatrixBlocks& blocks, const AtomSpec& atom) {
  os << std::setprecision(17) << "block,row,col,m_row,m_col,re,im\n";
  auto dump = [&](const char* name, const Eigen::MatrixXcd& m, Spin rows, Spin cols) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        os << name << "," << i << "," << j << "," << projection_at(rows, static_cast<int>(i)).value() << ","
           << projection_at(cols, static_cast<int>(j)).value() << "," << m(i, j).real() << "," << m(i, j).imag()
           << "\n";
  };
  dump("rho_g", blocks.rho_g, atom.f_g, atom.f_g);
  dump("rho_e", blocks.rho_e, atom.f_e, atom.f_e);
  dump("rho_eg", blocks.rho_eg, atom.f_e, atom.f_g);
}

/// Whitespace-separated columns for gnuplot; '#' lines are comments there too.
inline void write_plot_columns(std::ostream& os, const std::string& header, const std::vector<double>& x,
                               const std::vector<double>& y) {
  os << std::setprecision(17) << "# " << header << "\n";
  for (std::size_t i = 0; i < x.size(); ++i) os << x[i] << " " << y[i] << "\n";
}

/// Gnuplot data for a curve: one file, omega_g versus signal.
inline std::vector<std::filesystem::path> emit_plot_data(const ResonanceCurve& curve,
                                                         const std::filesystem::path& path) {
  if (curve.omega_g.empty()) throw std::invalid_argument("cannot emit plot data for an empty curve");
  AtomicFile f(path);
  write_plot_columns(f.stream(), "omega_g signal", curve.omega_g, curve.signal);
  f.commit();
  return {path};
}

/// Gnuplot data for a sweep: amplitude, width and ratio versus epsilon, one file each, named
/// stem_amplitude.dat, stem_width.dat and stem_ratio.dat.
inline std::vector<std::filesystem::path> emit_plot_data(const EllipticitySweep& sweep,
                                                         const std::filesystem::path& stem) {
  if (sweep.epsilons.empty()) throw std::invalid_argument("cannot emit plot data for an empty sweep");
  std::vector<double> amp, width, ratio;
  for (const auto& p : sweep.params) {
    amp.push_back(p.amplitude);
    width.push_back(p.width);
    ratio.push_back(p.ratio);
  }
  const std::vector<std::pair<std::string, const std::vector<double>*>> panels{
      {"amplitude", &amp}, {"width", &width}, {"ratio", &ratio}};
  std::vector<std::unique_ptr<AtomicFile>> files;
  std::vector<std::filesystem::path> out;
  for (const auto& [name, values] : panels) {
    std::filesystem::path p = stem;
    p += "_" + name + ".dat";
    files.push_back(std::make_unique<AtomicFile>(p));
    write_plot_columns(files.back()->stream(), "epsilon " + name, sweep.epsilons, *values);
    out.push_back(p);
  }
  for (auto& f : files) f->commit();
  return out;
}

}  // namespace hanle
