#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "pdanse/container.hpp"
#include "pdanse/measurement.hpp"

namespace pdanse {

// Training corpus: a small labelled part and a large unlabelled part over
// disjoint trajectory indices. Reads of the labelled side are counted so the
// unsupervised path can be shown to never touch ground truth.
class Dataset {
 public:
  void add_labelled(StateTrajectory states, MeasurementTrajectory measurements) {
    labelled_.push_back({std::move(states), std::move(measurements)});
  }
  void add_unlabelled(MeasurementTrajectory measurements) {
    unlabelled_.push_back(std::move(measurements));
  }

  int num_labelled() const { return static_cast<int>(labelled_.size()); }
  int num_unlabelled() const { return static_cast<int>(unlabelled_.size()); }
  int size() const { return num_labelled() + num_unlabelled(); }

  const LabelledPair& labelled(int i) const {
    ++label_reads_;
    return labelled_.at(i);
  }
  const MeasurementTrajectory& unlabelled(int i) const { return unlabelled_.at(i); }

  const std::vector<LabelledPair>& labelled_pairs() const {
    ++label_reads_;
    return labelled_;
  }
  const std::vector<MeasurementTrajectory>& unlabelled_trajectories() const {
    return unlabelled_;
  }

  long label_read_count() const { return label_reads_; }

  nlohmann::json provenance;

 private:
  std::vector<LabelledPair> labelled_;
  std::vector<MeasurementTrajectory> unlabelled_;
  mutable long label_reads_ = 0;
};

namespace detail {

inline void append_trajectory(std::vector<double>& out, const StateTrajectory& traj) {
  for (const auto& x : traj.states) {
    out.push_back(x[0]);
    out.push_back(x[1]);
    out.push_back(x[2]);
  }
}

inline void append_trajectory(std::vector<double>& out, const MeasurementTrajectory& traj) {
  for (const auto& y : traj.measurements) {
    out.insert(out.end(), y.data(), y.data() + y.size());
  }
}

}  // namespace detail

// Dataset file: three tensors (labelled states/measurements, unlabelled
// measurements) plus the provenance manifest. All trajectories in one file
// share T and the measurement dimension.
inline void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  const int ns = data.num_labelled();
  const int nu = data.num_unlabelled();
  std::int64_t t_len = 0;
  std::int64_t y_dim = 0;
  if (ns > 0) {
    t_len = data.labelled_pairs()[0].states.length();
    y_dim = data.labelled_pairs()[0].measurements.dim();
  } else if (nu > 0) {
    t_len = data.unlabelled_trajectories()[0].length();
    y_dim = data.unlabelled_trajectories()[0].dim();
  }

  std::vector<NamedTensor> tensors;
  NamedTensor states{"labelled_states", {ns, t_len, 3}, {}};
  NamedTensor meas_s{"labelled_measurements", {ns, t_len, y_dim}, {}};
  for (const auto& pair : data.labelled_pairs()) {
    if (pair.states.length() != t_len || pair.measurements.dim() != y_dim) {
      throw std::runtime_error("save_dataset: trajectories must share T and dim");
    }
    detail::append_trajectory(states.data, pair.states);
    detail::append_trajectory(meas_s.data, pair.measurements);
  }
  NamedTensor meas_u{"unlabelled_measurements", {nu, t_len, y_dim}, {}};
  for (const auto& y : data.unlabelled_trajectories()) {
    if (y.length() != t_len || y.dim() != y_dim) {
      throw std::runtime_error("save_dataset: trajectories must share T and dim");
    }
    detail::append_trajectory(meas_u.data, y);
  }
  tensors.push_back(std::move(states));
  tensors.push_back(std::move(meas_s));
  tensors.push_back(std::move(meas_u));
  write_container(path, data.provenance, tensors);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = read_container(path);
  Dataset data;
  data.provenance = c.meta;
  const double dt = c.meta.value("dt", 0.02);
  const double sigma_e2 = c.meta.value("process_noise_var", 0.0);

  const NamedTensor& states = c.find("labelled_states");
  const NamedTensor& meas_s = c.find("labelled_measurements");
  const NamedTensor& meas_u = c.find("unlabelled_measurements");
  const std::int64_t ns = states.shape.at(0);
  const std::int64_t t_len = states.shape.at(1);
  const std::int64_t y_dim = meas_s.shape.at(2);

  for (std::int64_t i = 0; i < ns; ++i) {
    StateTrajectory st;
    st.dt = dt;
    st.process_noise_var = sigma_e2;
    MeasurementTrajectory mt;
    for (std::int64_t t = 0; t < t_len; ++t) {
      const double* xp = states.data.data() + (i * t_len + t) * 3;
      st.states.emplace_back(xp[0], xp[1], xp[2]);
      const double* yp = meas_s.data.data() + (i * t_len + t) * y_dim;
      mt.measurements.emplace_back(Eigen::Map<const Eigen::VectorXd>(yp, y_dim));
    }
    data.add_labelled(std::move(st), std::move(mt));
  }
  const std::int64_t nu = meas_u.shape.at(0);
  for (std::int64_t i = 0; i < nu; ++i) {
    MeasurementTrajectory mt;
    for (std::int64_t t = 0; t < t_len; ++t) {
      const double* yp = meas_u.data.data() + (i * t_len + t) * y_dim;
      mt.measurements.emplace_back(Eigen::Map<const Eigen::VectorXd>(yp, y_dim));
    }
    data.add_unlabelled(std::move(mt));
  }
  return data;
}

}  // namespace pdanse
