#include "poseloop/io/motion_file.hpp"

#include <nlohmann/json.hpp>

#include <cstring>

#include "poseloop/common/error.hpp"
#include "poseloop/common/fsio.hpp"

namespace poseloop::io {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'M', 'O', 'T', 'N', '1', '\n'};

std::string checksum_hex(std::uint32_t sum) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", sum);
  return buf;
}

struct RawFile {
  nlohmann::json header;
  std::string bytes;   // whole file
  std::size_t payload_at = 0;
};

RawFile open_motion(const std::filesystem::path& path) {
  RawFile raw;
  raw.bytes = read_file(path);
  if (raw.bytes.size() < 16 || std::memcmp(raw.bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a motion file: " + path.string());
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw.bytes[8 + i]))
           << (8 * i);
  if (raw.bytes.size() < 16 + len)
    throw DataError("motion file header truncated: " + path.string());
  try {
    raw.header = nlohmann::json::parse(raw.bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("motion file header is not valid JSON: " + std::string(e.what()));
  }
  raw.payload_at = 16 + len;
  return raw;
}

void check_header(const nlohmann::json& header, const SkeletonSpec& skel,
                  const std::string& representation, const std::filesystem::path& path) {
  if (header.value("format", 0) != 1)
    throw DataError("unsupported motion file version " +
                    std::to_string(header.value("format", 0)) + " in " + path.string());
  std::string rep = header.value("representation", "");
  if (rep != representation)
    throw DataError("motion file holds representation '" + rep + "', expected '" +
                    representation + "': " + path.string());
  std::string sum = header.at("skeleton").value("checksum", "");
  if (sum != checksum_hex(motion::skeleton_checksum(skel)))
    throw DataError("skeleton checksum mismatch: file has " + sum + ", rig is " +
                    checksum_hex(motion::skeleton_checksum(skel)));
}

void write_motion(const std::filesystem::path& path, nlohmann::json header,
                  const SkeletonSpec& skel, const double* payload, std::size_t count) {
  header["format"] = 1;
  header["skeleton"] = {{"id", skeleton_id(skel)},
                        {"checksum", checksum_hex(motion::skeleton_checksum(skel))}};
  std::string head = header.dump();

  std::string bytes;
  bytes.reserve(16 + head.size() + count * sizeof(double));
  bytes.append(kMagic, sizeof(kMagic));
  std::uint64_t len = head.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  bytes.append(lenbuf, 8);
  bytes.append(head);
  bytes.append(reinterpret_cast<const char*>(payload), count * sizeof(double));
  write_file_atomic(path, bytes);
}

const double* payload_ptr(const RawFile& raw, std::size_t count,
                          const std::filesystem::path& path) {
  if (raw.bytes.size() - raw.payload_at != count * sizeof(double))
    throw DataError("motion file payload truncated: expected " +
                    std::to_string(count * sizeof(double)) + " bytes, found " +
                    std::to_string(raw.bytes.size() - raw.payload_at) + " in " +
                    path.string());
  return reinterpret_cast<const double*>(raw.bytes.data() + raw.payload_at);
}

}  // namespace

std::string skeleton_id(const SkeletonSpec& skel) {
  return "rig" + std::to_string(skel.joint_count()) + "-" +
         checksum_hex(motion::skeleton_checksum(skel));
}

void save_motion_3d(const std::filesystem::path& path, const MotionSequence3D& motion,
                    const SkeletonSpec& skel) {
  int t_count = motion.length();
  int joints = motion.joint_count();
  std::vector<double> payload(static_cast<std::size_t>(t_count) * joints * 3);
  std::size_t at = 0;
  for (const auto& frame : motion.frames)
    for (int j = 0; j < joints; ++j)
      for (int c = 0; c < 3; ++c) payload[at++] = frame(j, c);

  nlohmann::json header = {{"representation", "positions-3d"},
                           {"fps", motion.fps},
                           {"frames", t_count},
                           {"joints", joints},
                           {"stage", motion::stage_tag_name(motion.stage)}};
  write_motion(path, std::move(header), skel, payload.data(), payload.size());
}

MotionSequence3D load_motion_3d(const std::filesystem::path& path,
                                const SkeletonSpec& skel) {
  RawFile raw = open_motion(path);
  check_header(raw.header, skel, "positions-3d", path);
  int t_count = raw.header.at("frames").get<int>();
  int joints = raw.header.at("joints").get<int>();
  const double* p =
      payload_ptr(raw, static_cast<std::size_t>(t_count) * joints * 3, path);

  MotionSequence3D out;
  out.fps = raw.header.at("fps").get<double>();
  out.stage = motion::stage_tag_from_name(raw.header.at("stage").get<std::string>());
  out.frames.reserve(t_count);
  for (int t = 0; t < t_count; ++t) {
    Eigen::MatrixXd frame(joints, 3);
    for (int j = 0; j < joints; ++j)
      for (int c = 0; c < 3; ++c) frame(j, c) = *p++;
    out.frames.push_back(std::move(frame));
  }
  if (!out.all_finite()) throw DataError("motion file holds non-finite values: " + path.string());
  return out;
}

void save_motion_2d(const std::filesystem::path& path, const Pose2DSequence& poses,
                    const SkeletonSpec& skel, StageTag stage) {
  int t_count = poses.length();
  int joints = poses.joint_count();
  std::vector<double> payload(static_cast<std::size_t>(t_count) * joints * 2);
  std::size_t at = 0;
  for (const auto& frame : poses.frames)
    for (int j = 0; j < joints; ++j)
      for (int c = 0; c < 2; ++c) payload[at++] = frame(j, c);

  nlohmann::json header = {{"representation", "pose-2d"},
                           {"fps", poses.fps},
                           {"frames", t_count},
                           {"joints", joints},
                           {"stage", motion::stage_tag_name(stage)}};
  write_motion(path, std::move(header), skel, payload.data(), payload.size());
}

Pose2DSequence load_motion_2d(const std::filesystem::path& path,
                              const SkeletonSpec& skel) {
  RawFile raw = open_motion(path);
  check_header(raw.header, skel, "pose-2d", path);
  int t_count = raw.header.at("frames").get<int>();
  int joints = raw.header.at("joints").get<int>();
  const double* p =
      payload_ptr(raw, static_cast<std::size_t>(t_count) * joints * 2, path);

  Pose2DSequence out;
  out.fps = raw.header.at("fps").get<double>();
  out.frames.reserve(t_count);
  for (int t = 0; t < t_count; ++t) {
    Eigen::MatrixXd frame(joints, 2);
    for (int j = 0; j < joints; ++j)
      for (int c = 0; c < 2; ++c) frame(j, c) = *p++;
    out.frames.push_back(std::move(frame));
  }
  if (!out.all_finite()) throw DataError("motion file holds non-finite values: " + path.string());
  return out;
}

void save_motion_reduced(const std::filesystem::path& path,
                         const ReducedPoseSequence& reduced, StageTag stage,
                         const SkeletonSpec& skel) {
  int t_count = reduced.length();
  int dof = skel.non_root_dof();
  std::size_t row = 7 + static_cast<std::size_t>(dof);
  std::vector<double> payload(static_cast<std::size_t>(t_count) * row);
  std::size_t at = 0;
  for (const auto& f : reduced.frames) {
    if (f.angles.size() != dof)
      throw DataError("reduced frame has " + std::to_string(f.angles.size()) +
                      " dof, skeleton expects " + std::to_string(dof));
    payload[at++] = f.root_pos.x();
    payload[at++] = f.root_pos.y();
    payload[at++] = f.root_pos.z();
    payload[at++] = f.root_rot.w();
    payload[at++] = f.root_rot.x();
    payload[at++] = f.root_rot.y();
    payload[at++] = f.root_rot.z();
    for (int d = 0; d < dof; ++d) payload[at++] = f.angles[d];
  }

  nlohmann::json header = {{"representation", "reduced"},
                           {"fps", reduced.fps},
                           {"frames", t_count},
                           {"joints", skel.joint_count()},
                           {"dof", dof},
                           {"stage", motion::stage_tag_name(stage)}};
  write_motion(path, std::move(header), skel, payload.data(), payload.size());
}

ReducedWithStage load_motion_reduced(const std::filesystem::path& path,
                                     const SkeletonSpec& skel) {
  RawFile raw = open_motion(path);
  check_header(raw.header, skel, "reduced", path);
  int t_count = raw.header.at("frames").get<int>();
  int dof = raw.header.at("dof").get<int>();
  if (dof != skel.non_root_dof())
    throw DataError("motion file has " + std::to_string(dof) + " dof, skeleton expects " +
                    std::to_string(skel.non_root_dof()));
  std::size_t row = 7 + static_cast<std::size_t>(dof);
  const double* p = payload_ptr(raw, static_cast<std::size_t>(t_count) * row, path);

  ReducedWithStage out;
  out.stage = motion::stage_tag_from_name(raw.header.at("stage").get<std::string>());
  out.sequence.fps = raw.header.at("fps").get<double>();
  out.sequence.frames.reserve(t_count);
  for (int t = 0; t < t_count; ++t) {
    motion::ReducedFrame f;
    f.root_pos = motion::Vec3(p[0], p[1], p[2]);
    f.root_rot = motion::Quat(p[3], p[4], p[5], p[6]);
    f.angles.resize(dof);
    for (int d = 0; d < dof; ++d) f.angles[d] = p[7 + d];
    p += row;
    if (!f.root_pos.allFinite() || !f.angles.allFinite() ||
        !f.root_rot.coeffs().allFinite())
      throw DataError("motion file holds non-finite values: " + path.string());
    out.sequence.frames.push_back(std::move(f));
  }
  return out;
}

nlohmann::json read_motion_header(const std::filesystem::path& path) {
  return open_motion(path).header;
}

}  // namespace poseloop::io
