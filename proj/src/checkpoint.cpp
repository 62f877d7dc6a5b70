#include "sasv/checkpoint.hpp"

#include "sasv/error.hpp"

namespace sasv {

namespace detail {

void write_tensors(io::ByteWriter& out, const std::vector<std::span<double>>& tensors) {
    for (auto t : tensors) {
        for (double v : t) out.put<double>(v);
    }
}

void read_tensors(io::ByteReader& in, const std::vector<std::span<double>>& tensors) {
    for (auto t : tensors) {
        for (double& v : t) v = in.get<double>();
    }
}

void write_adam(io::ByteWriter& out, const AdamState& adam) {
    if (adam.empty()) {
        out.put<std::uint8_t>(0);
        return;
    }
    out.put<std::uint8_t>(1);
    out.put<std::uint64_t>(adam.step);
    for (const auto& m : adam.m) {
        for (double v : m) out.put<double>(v);
    }
    for (const auto& v : adam.v) {
        for (double x : v) out.put<double>(x);
    }
}

AdamState read_adam(io::ByteReader& in, const std::vector<std::span<double>>& shape) {
    const auto flag = in.get<std::uint8_t>();
    if (flag == 0) return {};
    if (flag != 1) throw Error(ErrorCode::BadMagic, "bad optimizer-state flag " + std::to_string(flag));
    AdamState adam = make_adam_state(shape);
    adam.step = in.get<std::uint64_t>();
    for (auto& m : adam.m) {
        for (double& v : m) v = in.get<double>();
    }
    for (auto& v : adam.v) {
        for (double& x : v) x = in.get<double>();
    }
    return adam;
}

} // namespace detail

namespace {

constexpr std::string_view kMagic = "SASV";

} // namespace

std::string serialize_checkpoint(const FusionCheckpoint& checkpoint) {
    checkpoint.params.validate();
    FusionParams params = checkpoint.params;
    const auto dims = params.dims();

    io::ByteWriter out;
    out.put_bytes(kMagic);
    out.put<std::uint16_t>(kCheckpointVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(dims.cm_dim));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(dims.num_sv));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(dims.hidden.size()));
    for (auto h : dims.hidden) out.put<std::uint32_t>(static_cast<std::uint32_t>(h));
    detail::write_tensors(out, tensors(params));
    detail::write_adam(out, checkpoint.adam);
    return out.take();
}

FusionCheckpoint parse_checkpoint(std::string_view bytes) {
    if (bytes.substr(0, kMagic.size()) != kMagic) throw Error(ErrorCode::BadMagic, "expected SASV checkpoint header");
    io::ByteReader in(bytes);
    in.get_bytes(kMagic.size());
    const auto version = in.get<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::BadMagic, "unsupported checkpoint version " + std::to_string(version));
    }
    FusionDims dims;
    dims.cm_dim = in.get<std::uint32_t>();
    dims.num_sv = in.get<std::uint32_t>();
    const auto num_hidden = in.get<std::uint32_t>();
    if (num_hidden > 64) throw Error(ErrorCode::ShapeMismatch, "implausible hidden layer count");
    dims.hidden.clear();
    for (std::uint32_t i = 0; i < num_hidden; ++i) dims.hidden.push_back(in.get<std::uint32_t>());

    FusionCheckpoint cp;
    cp.params = init_params(dims, 0);
    auto shape = tensors(cp.params);
    detail::read_tensors(in, shape);
    cp.adam = detail::read_adam(in, shape);
    if (!in.at_end()) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after checkpoint");
    return cp;
}

void save_checkpoint(const std::filesystem::path& path, const FusionCheckpoint& checkpoint) {
    io::write_file(path, serialize_checkpoint(checkpoint));
}

FusionCheckpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(io::read_file(path)); }

} // namespace sasv
