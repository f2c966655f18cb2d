#include "poseloop/evalkit/metrics.hpp"

#include <cmath>

#include "poseloop/common/error.hpp"

namespace poseloop::evalkit {

namespace {

void check_same_shape(const MotionSequence3D& pred, const MotionSequence3D& ref) {
  if (pred.length() != ref.length())
    throw DataError("sequences differ in length: " + std::to_string(pred.length()) +
                    " vs " + std::to_string(ref.length()));
  if (pred.joint_count() != ref.joint_count())
    throw DataError("sequences differ in joint count: " +
                    std::to_string(pred.joint_count()) + " vs " +
                    std::to_string(ref.joint_count()));
  if (pred.length() == 0) throw DataError("cannot score empty sequences");
}

}  // namespace

std::vector<double> joint_errors_mm(const MotionSequence3D& pred,
                                    const MotionSequence3D& ref, bool root_align,
                                    int root_joint) {
  check_same_shape(pred, ref);
  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(pred.length()) * pred.joint_count());
  for (int t = 0; t < pred.length(); ++t) {
    motion::Vec3 p_root = root_align ? pred.joint(t, root_joint) : motion::Vec3::Zero();
    motion::Vec3 r_root = root_align ? ref.joint(t, root_joint) : motion::Vec3::Zero();
    for (int j = 0; j < pred.joint_count(); ++j) {
      motion::Vec3 d = (pred.joint(t, j) - p_root) - (ref.joint(t, j) - r_root);
      errors.push_back(1000.0 * d.norm());
    }
  }
  return errors;
}

double mpjpe_mm(const MotionSequence3D& pred, const MotionSequence3D& ref,
                bool root_align, int root_joint) {
  auto errors = joint_errors_mm(pred, ref, root_align, root_joint);
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / errors.size();
}

SimilarityTransform umeyama_alignment(const Eigen::MatrixXd& from,
                                      const Eigen::MatrixXd& to) {
  if (from.rows() != to.rows() || from.cols() != 3 || to.cols() != 3)
    throw DataError("umeyama expects matching N x 3 point sets");
  if (from.rows() < 3) throw DataError("umeyama needs at least 3 points");

  double n = static_cast<double>(from.rows());
  Eigen::RowVector3d mu_p = from.colwise().mean();
  Eigen::RowVector3d mu_q = to.colwise().mean();
  Eigen::MatrixXd pc = from.rowwise() - mu_p;
  Eigen::MatrixXd qc = to.rowwise() - mu_q;

  motion::Mat3 sigma = (qc.transpose() * pc) / n;
  Eigen::JacobiSVD<motion::Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  motion::Mat3 u = svd.matrixU();
  motion::Mat3 v = svd.matrixV();
  motion::Mat3 s = motion::Mat3::Identity();
  if ((u * v.transpose()).determinant() < 0.0) s(2, 2) = -1.0;

  SimilarityTransform out;
  out.rotation = u * s * v.transpose();
  double var_p = pc.array().square().sum() / n;
  if (var_p < 1e-15) throw DataError("umeyama source points are degenerate");
  out.scale = (svd.singularValues().asDiagonal() * s).trace() / var_p;
  out.translation =
      mu_q.transpose() - out.scale * (out.rotation * mu_p.transpose());
  return out;
}

double pa_mpjpe_mm(const MotionSequence3D& pred, const MotionSequence3D& ref,
                   PaMode mode) {
  check_same_shape(pred, ref);
  int joints = pred.joint_count();

  auto aligned_error = [&](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
    SimilarityTransform st = umeyama_alignment(p, q);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      sum += (st.apply(p.row(i).transpose()) - motion::Vec3(q.row(i).transpose())).norm();
    return 1000.0 * sum / static_cast<double>(p.rows());
  };

  if (mode == PaMode::per_frame) {
    double sum = 0.0;
    for (int t = 0; t < pred.length(); ++t)
      sum += aligned_error(pred.frames[t], ref.frames[t]);
    return sum / pred.length();
  }

  Eigen::MatrixXd p(pred.length() * joints, 3), q(pred.length() * joints, 3);
  for (int t = 0; t < pred.length(); ++t) {
    p.middleRows(t * joints, joints) = pred.frames[t];
    q.middleRows(t * joints, joints) = ref.frames[t];
  }
  return aligned_error(p, q);
}

double pck_from_errors(const std::vector<double>& errors_mm, double threshold_mm) {
  if (errors_mm.empty()) throw DataError("PCK over an empty error list");
  std::size_t hits = 0;
  for (double e : errors_mm)
    if (e < threshold_mm) ++hits;
  return static_cast<double>(hits) / errors_mm.size();
}

double auc_from_errors(const std::vector<double>& errors_mm) {
  double sum = 0.0;
  int points = 0;
  for (int t = 0; t <= 150; t += 5) {
    sum += pck_from_errors(errors_mm, static_cast<double>(t));
    ++points;
  }
  return sum / points;
}

double foot_skate_mm(const MotionSequence3D& motion, const std::vector<int>& feet,
                     double contact_height) {
  if (feet.empty()) throw DataError("foot skate needs at least one foot joint");
  double drift = 0.0;
  int pairs = 0;
  for (int j : feet)
    for (int t = 0; t + 1 < motion.length(); ++t) {
      if (motion.joint(t, j).z() >= contact_height ||
          motion.joint(t + 1, j).z() >= contact_height)
        continue;
      Eigen::Vector2d step = motion.joint(t + 1, j).head<2>() - motion.joint(t, j).head<2>();
      drift += 1000.0 * step.norm();
      ++pairs;
    }
  return pairs == 0 ? 0.0 : drift / pairs;
}

double ground_penetration_cm(const MotionSequence3D& motion, const std::vector<int>& feet) {
  if (feet.empty()) throw DataError("ground penetration needs at least one foot joint");
  if (motion.length() == 0) return 0.0;
  double sum = 0.0;
  for (int j : feet)
    for (int t = 0; t < motion.length(); ++t)
      sum += 100.0 * std::max(0.0, -motion.joint(t, j).z());
  return sum / (static_cast<double>(motion.length()) * feet.size());
}

}  // namespace poseloop::evalkit
