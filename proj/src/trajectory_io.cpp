#include "limda/trajectory_io.hpp"

#include "limda/errors.hpp"
#include "limda/io.hpp"

#include <fstream>
#include <sstream>

namespace limda {

namespace {

constexpr const char* kMagic = "LIMDA-TRAJECTORY 1";

}  // namespace

void write_trajectory(const std::filesystem::path& path, nlohmann::json header, const Eigen::MatrixXd& frames) {
    // row-major payload
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = frames;
    const std::string payload = io::encode_f64_le({rows.data(), static_cast<std::size_t>(rows.size())});
    header["frames"] = frames.rows();
    header["values_per_frame"] = frames.cols();
    header["crc64"] = io::hex64(io::crc64(payload));
    std::string bytes = std::string(kMagic) + "\n" + header.dump() + "\n";
    bytes += payload;
    io::atomic_write(path, bytes);
}

namespace {

nlohmann::json parse_header(std::istream& in, const std::filesystem::path& path) {
    std::string magic;
    std::string line;
    if (!std::getline(in, magic) || magic != kMagic) throw CorruptData("not a trajectory file: " + path.string());
    if (!std::getline(in, line)) throw CorruptData("missing trajectory header: " + path.string());
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptData("bad trajectory header in " + path.string() + ": " + e.what());
    }
}

}  // namespace

nlohmann::json read_trajectory_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptData("cannot open " + path.string());
    return parse_header(in, path);
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptData("cannot open " + path.string());
    TrajectoryFile out;
    out.header = parse_header(in, path);
    const Index frames = out.header.at("frames").get<Index>();
    const Index values = out.header.at("values_per_frame").get<Index>();
    if (frames < 0 || values < 0) throw CorruptData("negative shape in " + path.string());
    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string payload = rest.str();
    if (payload.size() != static_cast<std::size_t>(frames * values * 8))
        throw CorruptData("truncated or oversized trajectory payload: " + path.string());
    if (io::hex64(io::crc64(payload)) != out.header.at("crc64").get<std::string>())
        throw CorruptData("trajectory checksum mismatch: " + path.string());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(frames, values);
    std::istringstream block(payload);
    io::read_f64_le(block, {rows.data(), static_cast<std::size_t>(rows.size())});
    out.frames = rows;
    return out;
}

nlohmann::json grid_to_json(const Grid2D& g) {
    return {{"n1", g.n1}, {"n2", g.n2}, {"dx1", g.dx1}, {"dx2", g.dx2}, {"dt", g.dt}, {"i0", g.i0}, {"j0", g.j0}};
}

Grid2D grid_from_json(const nlohmann::json& j) {
    Grid2D g;
    g.n1 = j.at("n1");
    g.n2 = j.at("n2");
    g.dx1 = j.at("dx1");
    g.dx2 = j.at("dx2");
    g.dt = j.at("dt");
    g.i0 = j.value("i0", 0);
    g.j0 = j.value("j0", 0);
    return g;
}

void write_burgers_trajectory(const std::filesystem::path& path, const Grid2D& grid, const BurgersOptions& options,
                              const BoundarySpec& bc, const std::vector<BurgersField>& frames) {
    Eigen::MatrixXd data(static_cast<Index>(frames.size()), 2 * grid.size());
    for (std::size_t f = 0; f < frames.size(); ++f) data.row(static_cast<Index>(f)) = flatten(frames[f]).transpose();
    nlohmann::json header = {
        {"model", "burgers"},
        {"grid", grid_to_json(grid)},
        {"parameters", {{"kappa", options.kappa}, {"advection", options.advection}}},
        {"boundary", to_string(bc.kind)},
        {"boundary_amplitude", bc.amplitude},
        {"layout", "u then v, row-major over (i, j)"},
        {"first_step", frames.empty() ? 0 : frames.front().k},
    };
    write_trajectory(path, std::move(header), data);
}

std::vector<BurgersField> read_burgers_trajectory(const std::filesystem::path& path, Grid2D* grid_out) {
    const TrajectoryFile file = read_trajectory(path);
    if (file.header.value("model", "") != "burgers") throw CorruptData("not a Burgers trajectory: " + path.string());
    const Grid2D grid = grid_from_json(file.header.at("grid"));
    if (file.frames.cols() != 2 * grid.size()) throw CorruptData("frame size does not match grid: " + path.string());
    const int first = file.header.value("first_step", 0);
    std::vector<BurgersField> frames;
    for (Index f = 0; f < file.frames.rows(); ++f)
        frames.push_back(unflatten(grid, file.frames.row(f).transpose(), first + static_cast<int>(f)));
    if (grid_out) *grid_out = grid;
    return frames;
}

}  // namespace limda
