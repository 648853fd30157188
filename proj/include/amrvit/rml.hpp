#pragma once

#include <hdf5.h>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/dataset.hpp"
#include "amrvit/rng.hpp"

namespace amrvit {

// RML2018.01A-style container: dataset "X" float32 [N, 1024, 2] (last axis
// I then Q), "Y" one-hot integers [N, 24], "Z" integer SNR dB [N, 1].
constexpr int kRmlFrameLen = 1024;
constexpr int kRmlNumClasses = 24;

struct RmlRequest {
    std::vector<std::string> class_names;  // requested classes, in output index order
    int snr_min_db = -2;
    int snr_max_db = 20;
    int per_cell = 0;  // samples per (class, SNR); 0 -> empty dataset
    enum class Reduce { truncate, decimate } reduce = Reduce::truncate;
    int target_len = 512;
};

namespace detail {

inline void h5_quiet() {
    static const bool once = [] {
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
        return true;
    }();
    (void)once;
}

struct H5Handle {
    hid_t id = H5I_INVALID_HID;
    herr_t (*closer)(hid_t) = nullptr;
    H5Handle(hid_t i, herr_t (*c)(hid_t)) : id(i), closer(c) {}
    ~H5Handle() {
        if (id >= 0 && closer) closer(id);
    }
    H5Handle(const H5Handle&) = delete;
    H5Handle& operator=(const H5Handle&) = delete;
    bool ok() const { return id >= 0; }
};

inline std::vector<hsize_t> dataset_dims(hid_t dset) {
    H5Handle space(H5Dget_space(dset), H5Sclose);
    const int rank = H5Sget_simple_extent_ndims(space.id);
    std::vector<hsize_t> dims(std::max(rank, 0));
    if (rank > 0) H5Sget_simple_extent_dims(space.id, dims.data(), nullptr);
    return dims;
}

}  // namespace detail

inline std::vector<std::string> load_class_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("class-map sidecar not found: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array() || j.size() != kRmlNumClasses)
        throw std::runtime_error("class-map sidecar must be a JSON list of 24 names: " + path);
    return j.get<std::vector<std::string>>();
}

// Subsample an RML container into a balanced dataset: up to per_cell frames
// for every requested (class, SNR) cell within [snr_min, snr_max]. Cells
// with fewer than per_cell candidates are an error. Frames are reduced from
// 1024 samples to target_len by truncation or stride-2 decimation.
inline Dataset load_rml(const std::string& path, const std::string& sidecar_path, const RmlRequest& req,
                        Rng& rng) {
    detail::h5_quiet();
    if (!std::filesystem::exists(path)) throw std::runtime_error("RML file not found: " + path);
    const auto vocab = load_class_sidecar(sidecar_path);

    std::map<std::string, int> file_index;
    for (int k = 0; k < kRmlNumClasses; ++k) file_index[vocab[k]] = k;
    std::vector<int> requested_file_idx(req.class_names.size());
    for (size_t c = 0; c < req.class_names.size(); ++c) {
        const auto it = file_index.find(req.class_names[c]);
        if (it == file_index.end())
            throw std::runtime_error("requested class not in sidecar vocabulary: " + req.class_names[c]);
        requested_file_idx[c] = it->second;
    }
    if (req.reduce == RmlRequest::Reduce::decimate && req.target_len * 2 != kRmlFrameLen)
        throw std::invalid_argument("load_rml: stride-2 decimation requires target_len == 512");
    if (req.reduce == RmlRequest::Reduce::truncate && (req.target_len <= 0 || req.target_len > kRmlFrameLen))
        throw std::invalid_argument("load_rml: target_len out of range");

    detail::H5Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw std::runtime_error("malformed RML layout: not an HDF5 file: " + path);

    detail::H5Handle dx(H5Dopen2(file.id, "X", H5P_DEFAULT), H5Dclose);
    detail::H5Handle dy(H5Dopen2(file.id, "Y", H5P_DEFAULT), H5Dclose);
    detail::H5Handle dz(H5Dopen2(file.id, "Z", H5P_DEFAULT), H5Dclose);
    if (!dx.ok() || !dy.ok() || !dz.ok())
        throw std::runtime_error("malformed RML layout: missing X/Y/Z dataset in " + path);

    const auto xd = detail::dataset_dims(dx.id);
    const auto yd = detail::dataset_dims(dy.id);
    const auto zd = detail::dataset_dims(dz.id);
    if (xd.size() != 3 || xd[1] != kRmlFrameLen || xd[2] != 2)
        throw std::runtime_error("malformed RML layout: X must be [N, 1024, 2] in " + path);
    if (yd.size() != 2 || yd[1] != kRmlNumClasses || yd[0] != xd[0])
        throw std::runtime_error("malformed RML layout: Y must be [N, 24] in " + path);
    if (zd.size() != 2 || zd[1] != 1 || zd[0] != xd[0])
        throw std::runtime_error("malformed RML layout: Z must be [N, 1] in " + path);
    const hsize_t n = xd[0];

    std::vector<int32_t> y(n * kRmlNumClasses);
    std::vector<int32_t> z(n);
    if (H5Dread(dy.id, H5T_NATIVE_INT32, H5S_ALL, H5S_ALL, H5P_DEFAULT, y.data()) < 0 ||
        H5Dread(dz.id, H5T_NATIVE_INT32, H5S_ALL, H5S_ALL, H5P_DEFAULT, z.data()) < 0)
        throw std::runtime_error("malformed RML layout: cannot read Y/Z in " + path);

    Dataset ds;
    ds.class_names = req.class_names;
    if (req.per_cell == 0) return ds;

    // candidate rows per (requested class, SNR level)
    std::map<std::pair<int, int>, std::vector<hsize_t>> cells;
    std::vector<int> file_to_req(kRmlNumClasses, -1);
    for (size_t c = 0; c < requested_file_idx.size(); ++c) file_to_req[requested_file_idx[c]] = static_cast<int>(c);
    for (hsize_t r = 0; r < n; ++r) {
        int fc = -1;
        for (int k = 0; k < kRmlNumClasses; ++k) {
            if (y[r * kRmlNumClasses + k] != 0) {
                fc = k;
                break;
            }
        }
        if (fc < 0 || file_to_req[fc] < 0) continue;
        const int snr = z[r];
        if (snr < req.snr_min_db || snr > req.snr_max_db) continue;
        cells[{file_to_req[fc], snr}].push_back(r);
    }

    std::vector<int> snr_levels;
    for (const auto& [key, rows] : cells)
        if (std::find(snr_levels.begin(), snr_levels.end(), key.second) == snr_levels.end())
            snr_levels.push_back(key.second);
    std::sort(snr_levels.begin(), snr_levels.end());

    struct Pick {
        hsize_t row;
        int class_id;
        int snr;
    };
    std::vector<Pick> picks;
    for (size_t c = 0; c < req.class_names.size(); ++c) {
        for (int snr : snr_levels) {
            auto it = cells.find({static_cast<int>(c), snr});
            const size_t have = it == cells.end() ? 0 : it->second.size();
            if (have < static_cast<size_t>(req.per_cell))
                throw std::runtime_error("insufficient samples for class " + req.class_names[c] + " at SNR " +
                                         std::to_string(snr) + " dB: have " + std::to_string(have) + ", need " +
                                         std::to_string(req.per_cell));
            auto& rows = it->second;
            for (int k = 0; k < req.per_cell; ++k) {
                const auto j = static_cast<size_t>(k) + static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(rows.size() - k)));
                std::swap(rows[k], rows[j]);
                picks.push_back({rows[k], static_cast<int>(c), snr});
            }
        }
    }

    // read selected rows in file order
    std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.row < b.row; });
    detail::H5Handle xspace(H5Dget_space(dx.id), H5Sclose);
    const hsize_t row_dims[3] = {1, kRmlFrameLen, 2};
    detail::H5Handle mem(H5Screate_simple(3, row_dims, nullptr), H5Sclose);
    std::vector<float> buf(kRmlFrameLen * 2);

    ds.samples.reserve(picks.size());
    for (const auto& p : picks) {
        const hsize_t start[3] = {p.row, 0, 0};
        H5Sselect_hyperslab(xspace.id, H5S_SELECT_SET, start, nullptr, row_dims, nullptr);
        if (H5Dread(dx.id, H5T_NATIVE_FLOAT, mem.id, xspace.id, H5P_DEFAULT, buf.data()) < 0)
            throw std::runtime_error("malformed RML layout: cannot read X row in " + path);
        LabeledSample s;
        s.frame = IQFrame(req.target_len);
        for (int t = 0; t < req.target_len; ++t) {
            const int src = req.reduce == RmlRequest::Reduce::decimate ? 2 * t : t;
            s.frame.i[t] = buf[2 * src];
            s.frame.q[t] = buf[2 * src + 1];
        }
        s.class_id = p.class_id;
        s.snr_db = p.snr;
        ds.samples.push_back(std::move(s));
    }
    // stable ordering: class-major, SNR-minor, matching build_synthetic_dataset
    std::stable_sort(ds.samples.begin(), ds.samples.end(), [](const LabeledSample& a, const LabeledSample& b) {
        return a.class_id != b.class_id ? a.class_id < b.class_id : a.snr_db < b.snr_db;
    });
    return ds;
}

// Test/tooling writer for the same container layout.
struct RmlRecord {
    IQFrame frame;  // must be 1024 samples
    int file_class = 0;
    int snr_db = 0;
};

inline void write_rml(const std::string& path, const std::vector<RmlRecord>& rows) {
    detail::h5_quiet();
    const hsize_t n = rows.size();
    detail::H5Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw std::runtime_error("write_rml: cannot create " + path);

    std::vector<float> x(n * kRmlFrameLen * 2);
    std::vector<int32_t> y(n * kRmlNumClasses, 0);
    std::vector<int32_t> z(n);
    for (hsize_t r = 0; r < n; ++r) {
        if (rows[r].frame.length() != kRmlFrameLen)
            throw std::invalid_argument("write_rml: frames must have 1024 samples");
        for (int t = 0; t < kRmlFrameLen; ++t) {
            x[(r * kRmlFrameLen + t) * 2] = rows[r].frame.i[t];
            x[(r * kRmlFrameLen + t) * 2 + 1] = rows[r].frame.q[t];
        }
        y[r * kRmlNumClasses + rows[r].file_class] = 1;
        z[r] = rows[r].snr_db;
    }

    const hsize_t xd[3] = {n, kRmlFrameLen, 2};
    const hsize_t yd[2] = {n, kRmlNumClasses};
    const hsize_t zd[2] = {n, 1};
    detail::H5Handle xs(H5Screate_simple(3, xd, nullptr), H5Sclose);
    detail::H5Handle ys(H5Screate_simple(2, yd, nullptr), H5Sclose);
    detail::H5Handle zs(H5Screate_simple(2, zd, nullptr), H5Sclose);
    detail::H5Handle dx(H5Dcreate2(file.id, "X", H5T_IEEE_F32LE, xs.id, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Dclose);
    detail::H5Handle dy(H5Dcreate2(file.id, "Y", H5T_STD_I32LE, ys.id, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Dclose);
    detail::H5Handle dz(H5Dcreate2(file.id, "Z", H5T_STD_I32LE, zs.id, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Dclose);
    if (!dx.ok() || !dy.ok() || !dz.ok()) throw std::runtime_error("write_rml: cannot create datasets");
    if (H5Dwrite(dx.id, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, x.data()) < 0 ||
        H5Dwrite(dy.id, H5T_NATIVE_INT32, H5S_ALL, H5S_ALL, H5P_DEFAULT, y.data()) < 0 ||
        H5Dwrite(dz.id, H5T_NATIVE_INT32, H5S_ALL, H5S_ALL, H5P_DEFAULT, z.data()) < 0)
        throw std::runtime_error("write_rml: write failed");
}

}  // namespace amrvit
