#include "talkhead/manifold.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "talkhead/errors.hpp"

namespace talkhead {

namespace {

constexpr double kExactMatchDistance = 1e-12;

}  // namespace

ReprDatabase::ReprDatabase(RowMatrix<float> features) : features_(std::move(features)) {
    if (features_.rows() == 0) throw DataError("manifold database is empty");
    if (!features_.allFinite()) {
        for (Eigen::Index r = 0; r < features_.rows(); ++r)
            if (!features_.row(r).allFinite())
                throw DataError("manifold database row " + std::to_string(r) + " is not finite");
    }
    sq_norms_ = features_.cast<double>().rowwise().squaredNorm();
    codes_.resize(features_.rows(), features_.cols());
    code_scale_.resize(features_.rows());
    code_l1_.resize(features_.rows());
    for (Eigen::Index r = 0; r < features_.rows(); ++r) {
        const double peak = features_.row(r).cwiseAbs().maxCoeff();
        const double scale = peak > 0.0 ? peak / 127.0 : 1.0;
        code_scale_[r] = scale;
        codes_.row(r) = (features_.row(r).cast<double>() / scale).array().round().cast<std::int8_t>();
        code_l1_[r] = codes_.row(r).cast<double>().cwiseAbs().sum();
    }
}

ReprDatabase build_database(std::span<const VectorXf> features) {
    if (features.empty()) throw DataError("build_database: no feature rows");
    const auto dim = features.front().size();
    RowMatrix<float> m(static_cast<Eigen::Index>(features.size()), dim);
    for (std::size_t i = 0; i < features.size(); ++i) {
        check_size(features[i].size(), dim, "build_database row");
        if (!features[i].allFinite()) throw DataError("build_database: row " + std::to_string(i) + " is not finite");
        m.row(static_cast<Eigen::Index>(i)) = features[i].transpose();
    }
    return ReprDatabase(std::move(m));
}

ReprDatabase ReprDatabase::from_store(const WeightStore& store) {
    const Tensor& t = store.get("manifold.db");
    if (t.rank() != 2) throw DimensionError("tensor 'manifold.db' must be rank 2");
    return ReprDatabase(Eigen::Map<const RowMatrix<float>>(t.data.data(), t.shape[0], t.shape[1]));
}

void ReprDatabase::to_store(WeightStore& store) const { store.set("manifold.db", Tensor::from_matrix(features_)); }

ReprDatabase ReprDatabase::load_raw(const std::filesystem::path& path) {
    const std::filesystem::path sidecar = path.string() + ".json";
    std::ifstream meta_in(sidecar);
    if (!meta_in) throw DataError("missing database sidecar " + sidecar.string());
    long long rows = 0, dim = kReprDim;
    try {
        const auto meta = nlohmann::json::parse(meta_in);
        rows = meta.at("rows").get<long long>();
        if (meta.contains("dim")) dim = meta.at("dim").get<long long>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad database sidecar " + sidecar.string() + ": " + e.what());
    }
    if (rows <= 0 || dim <= 0) throw FormatError("database sidecar must give positive rows and dim");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open database " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != static_cast<std::size_t>(rows * dim) * sizeof(float))
        throw FormatError("database " + path.string() + " holds " + std::to_string(bytes.size()) +
                          " bytes, sidecar implies " + std::to_string(rows * dim * 4));
    RowMatrix<float> m(rows, dim);
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return ReprDatabase(std::move(m));
}

void ReprDatabase::save_raw(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write database " + path.string());
    out.write(reinterpret_cast<const char*>(features_.data()),
              static_cast<std::streamsize>(features_.size() * sizeof(float)));
    std::ofstream meta(path.string() + ".json");
    meta << nlohmann::json{{"rows", features_.rows()}, {"dim", features_.cols()}}.dump() << "\n";
}

ReprDatabase ReprDatabase::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open database " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::string(magic, 4) == "LSPW") return from_store(load_weights(path));
    return load_raw(path);
}

Neighbors knn(const ReprDatabase& db, const Eigen::Ref<const VectorXf>& query, int k) {
    if (k < 1) throw DomainError("knn: K must be >= 1");
    if (k > db.rows())
        throw DomainError("knn: K = " + std::to_string(k) + " exceeds database size " + std::to_string(db.rows()));
    check_size(query.size(), db.dim(), "knn query");

    // Screen with exact int8 dot products against a quantized query. With
    // f = s a + e, |e| <= s/2 and q = t b + g, |g| <= t/2, the screened
    // ||f||^2 - 2 s t (a.b) is within 2 E of ||f||^2 - 2 f.q, where
    // E = s t ||a||_1 / 2 + s ||q||_1 / 2. Rows whose lower bound beats the
    // K-th smallest upper bound get exact double distances.
    const auto& f = db.features();
    const Eigen::Index n = f.rows(), dim = f.cols();
    const Eigen::VectorXd qd = query.cast<double>();
    const double q_peak = qd.cwiseAbs().maxCoeff();
    const double t = q_peak > 0.0 ? q_peak / 127.0 : 1.0;
    const std::vector<std::int8_t> qcode = [&] {
        std::vector<std::int8_t> c(static_cast<std::size_t>(dim));
        for (Eigen::Index j = 0; j < dim; ++j) c[j] = static_cast<std::int8_t>(std::round(qd[j] / t));
        return c;
    }();
    const double q_l1 = qd.lpNorm<1>();

    std::vector<double> lower(static_cast<std::size_t>(n));
    std::priority_queue<double> best_upper;
    const std::int8_t* codes = db.codes_.data();
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::int8_t* row = codes + i * dim;
        std::int32_t acc = 0;
        for (Eigen::Index j = 0; j < dim; ++j) acc += std::int32_t{row[j]} * std::int32_t{qcode[j]};
        const double s = db.code_scale_[i];
        const double screened = db.sq_norms_[i] - 2.0 * s * t * static_cast<double>(acc);
        const double bound = 2.0 * (0.5 * s * t * db.code_l1_[i] + 0.5 * s * q_l1);
        const double slack = 1e-9 * (std::abs(screened) + bound + db.sq_norms_[i]);
        lower[i] = screened - bound - slack;
        const double upper = screened + bound + slack;
        if (static_cast<int>(best_upper.size()) < k) {
            best_upper.push(upper);
        } else if (upper < best_upper.top()) {
            best_upper.pop();
            best_upper.push(upper);
        }
    }
    const double cutoff = best_upper.top();

    std::vector<std::pair<double, int>> candidates;
    for (Eigen::Index i = 0; i < n; ++i)
        if (lower[i] <= cutoff)
            candidates.emplace_back((f.row(i).transpose().cast<double>() - qd).squaredNorm(), static_cast<int>(i));
    std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());

    Neighbors out;
    out.indices.reserve(k);
    out.distances.reserve(k);
    for (int j = 0; j < k; ++j) {
        out.indices.push_back(candidates[j].second);
        out.distances.push_back(std::sqrt(candidates[j].first));
    }
    return out;
}

Vector<double> affine_weights(const Matrix<double>& neighbors, const Vector<double>& query) {
    const Eigen::Index k = neighbors.rows();
    check_size(neighbors.cols(), query.size(), "affine_weights neighbor dimension");
    if (k == 0) throw DomainError("affine_weights: no neighbors");
    if (k == 1) return Vector<double>::Ones(1);

    // w = w0 + N v with w0 = 1/k and N an orthonormal basis of {v : sum(v) = 0};
    // minimise ||Z w|| over v where the columns of Z are f_k - h.
    const Matrix<double> z = neighbors.transpose().colwise() - query;
    const Matrix<double> q = Eigen::HouseholderQR<Matrix<double>>(Matrix<double>::Ones(k, 1)).householderQ();
    const Matrix<double> basis = q.rightCols(k - 1);
    const Vector<double> w0 = Vector<double>::Constant(k, 1.0 / static_cast<double>(k));

    const Matrix<double> a = z * basis;
    const Vector<double> b = -(z * w0);
    const Vector<double> v = Eigen::CompleteOrthogonalDecomposition<Matrix<double>>(a).solve(b);
    Vector<double> w = w0 + basis * v;
    // Restore the exact affine constraint lost to rounding.
    w /= w.sum();
    return w;
}

ProjectionResult lle_project(const ReprDatabase& db, const Eigen::Ref<const VectorXf>& query, int k) {
    const Neighbors nn = knn(db, query, k);
    ProjectionResult result;
    result.neighbor_indices = nn.indices;

    if (nn.distances.front() < kExactMatchDistance) {
        result.weights = Vector<double>::Zero(k);
        result.weights[0] = 1.0;
        result.reconstructed = db.features().row(nn.indices.front()).transpose();
        result.residual = nn.distances.front();
        return result;
    }

    Matrix<double> f(k, db.dim());
    for (int i = 0; i < k; ++i) f.row(i) = db.features().row(nn.indices[i]).cast<double>();
    const Vector<double> h = query.cast<double>();
    result.weights = affine_weights(f, h);
    const Vector<double> recon = f.transpose() * result.weights;
    result.reconstructed = recon.cast<float>();
    result.residual = (h - recon).norm();
    return result;
}

}  // namespace talkhead
