#include <algorithm>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "talkhead/manifold.hpp"
#include "talkhead/random.hpp"

using namespace talkhead;

namespace {

ReprDatabase random_db(int rows, int dim, Rng& rng) {
    RowMatrix<float> m(rows, dim);
    fill_uniform(m, rng, 1.0);
    return ReprDatabase(m);
}

VectorXf random_query(int dim, Rng& rng, double bound = 1.0) {
    VectorXf q(dim);
    fill_uniform(q, rng, bound);
    return q;
}

std::vector<int> brute_force_knn(const ReprDatabase& db, const VectorXf& q, int k) {
    std::vector<std::pair<double, int>> d;
    for (int i = 0; i < db.rows(); ++i)
        d.emplace_back((db.features().row(i).transpose().cast<double>() - q.cast<double>()).squaredNorm(), i);
    std::sort(d.begin(), d.end());
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(d[i].second);
    return out;
}

double residual_for(const ReprDatabase& db, const std::vector<int>& idx, const Vector<double>& w, const VectorXf& q) {
    Vector<double> r = -q.cast<double>();
    for (std::size_t j = 0; j < idx.size(); ++j) r += w[j] * db.features().row(idx[j]).transpose().cast<double>();
    return r.norm();
}

}  // namespace

TEST_CASE("a database row is its own nearest neighbour") {
    Rng rng(1);
    const ReprDatabase db = random_db(50, 16, rng);
    const VectorXf q = db.features().row(17).transpose();
    const Neighbors n = knn(db, q, 5);
    CHECK(n.indices[0] == 17);
    CHECK(n.distances[0] == 0.0);

    const ProjectionResult p = lle_project(db, q, 5);
    CHECK(p.neighbor_indices[0] == 17);
    CHECK(p.weights[0] == 1.0);
    CHECK(p.weights.tail(4).isZero());
    CHECK(p.reconstructed == q);
    CHECK(p.residual == 0.0);
}

TEST_CASE("K = N returns every row sorted by distance") {
    Rng rng(2);
    const ReprDatabase db = random_db(20, 8, rng);
    const Neighbors n = knn(db, random_query(8, rng), 20);
    std::vector<int> sorted = n.indices;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> all(20);
    std::iota(all.begin(), all.end(), 0);
    CHECK(sorted == all);
    CHECK(std::is_sorted(n.distances.begin(), n.distances.end()));
    CHECK_THROWS_AS(knn(db, random_query(8, rng), 21), DomainError);
    CHECK_THROWS_AS(knn(db, random_query(8, rng), 0), DomainError);
    CHECK_THROWS_AS(knn(db, random_query(9, rng), 3), DimensionError);
}

TEST_CASE("knn agrees with an exhaustive scan on 1000 queries") {
    Rng rng(3);
    const ReprDatabase db = random_db(300, 12, rng);
    for (int trial = 0; trial < 1000; ++trial) {
        const VectorXf q = random_query(12, rng);
        auto got = knn(db, q, 10).indices;
        auto want = brute_force_knn(db, q, 10);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
    }
}

TEST_CASE("knn matches an exact double scan on clustered 512-d rows with mixed scales") {
    Rng rng(31);
    const int rows = 600, dim = 512;
    RowMatrix<float> m(rows, dim);
    fill_uniform(m, rng, 1.0);
    for (int r = 0; r < rows; ++r) {
        if (r % 3 == 1) m.row(r) = m.row(r - 1) + 1e-4f * RowMatrix<float>::Random(1, dim);
        if (r % 7 == 0) m.row(r) *= 50.0f;
        if (r % 11 == 0) m.row(r) *= 1e-3f;
    }
    const ReprDatabase db(m);
    for (int trial = 0; trial < 200; ++trial) {
        VectorXf q = m.row(static_cast<int>(rng.uniform() * rows)).transpose();
        q += random_query(dim, rng, trial % 2 == 0 ? 1e-3 : 0.5);
        const Neighbors got = knn(db, q, 10);
        std::vector<std::pair<double, int>> d;
        for (int i = 0; i < rows; ++i)
            d.emplace_back((m.row(i).transpose().cast<double>() - q.cast<double>()).squaredNorm(), i);
        std::sort(d.begin(), d.end());
        for (int i = 0; i < 10; ++i) {
            CHECK(got.indices[i] == d[i].second);
            CHECK(got.distances[i] == std::sqrt(d[i].first));
        }
    }
}

TEST_CASE("ties go to the lower index") {
    RowMatrix<float> m(4, 2);
    m << 1, 0, 0, 1, -1, 0, 0, -1;
    const Neighbors n = knn(ReprDatabase(m), VectorXf::Zero(2), 4);
    CHECK(n.indices == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("K = 2 collinear query reproduces the line projection") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        RowMatrix<float> m(6, 10);
        fill_uniform(m, rng, 1.0);
        m.bottomRows(4).array() += 20.0f;
        const double t = rng.uniform();
        const VectorXf a = m.row(0).transpose(), b = m.row(1).transpose();
        const VectorXf q = ((1.0 - t) * a.cast<double>() + t * b.cast<double>()).cast<float>();
        const ProjectionResult p = lle_project(ReprDatabase(m), q, 2);
        const Vector<double> ad = a.cast<double>(), bd = b.cast<double>();
        const double closed = (q.cast<double>() - ad).dot(bd - ad) / (bd - ad).squaredNorm();
        const int ia = p.neighbor_indices[0] == 0 ? 0 : 1;
        CHECK(std::abs(p.weights[ia] - (1.0 - closed)) < 1e-6);
        CHECK(std::abs(p.weights[1 - ia] - closed) < 1e-6);
        CHECK(std::abs(closed - t) < 1e-6);
        CHECK((p.reconstructed - q).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("off-line query projects orthogonally onto the line") {
    Rng rng(5);
    RowMatrix<float> m(2, 6);
    fill_uniform(m, rng, 1.0);
    const VectorXf q = random_query(6, rng);
    const Vector<double> a = m.row(0).transpose().cast<double>(), b = m.row(1).transpose().cast<double>();
    const double t = (q.cast<double>() - a).dot(b - a) / (b - a).squaredNorm();
    Matrix<double> nb(2, 6);
    nb.row(0) = a.transpose();
    nb.row(1) = b.transpose();
    const Vector<double> w = affine_weights(nb, q.cast<double>());
    CHECK(w[0] == doctest::Approx(1.0 - t).epsilon(1e-9));
    CHECK(w[1] == doctest::Approx(t).epsilon(1e-9));
}

TEST_CASE("weights sum to one and are least-squares optimal") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const ReprDatabase db = random_db(60, 24, rng);
        const VectorXf q = random_query(24, rng);
        const ProjectionResult p = lle_project(db, q, 10);
        CHECK(std::abs(p.weights.sum() - 1.0) < 1e-6);
        CHECK(p.residual == doctest::Approx(residual_for(db, p.neighbor_indices, p.weights, q)).epsilon(1e-5));
        for (int k = 0; k < 5; ++k) {
            Vector<double> dir(10);
            fill_uniform(dir, rng, 1.0);
            dir.array() -= dir.mean();
            const Vector<double> w2 = p.weights + 1e-3 * dir;
            CHECK(residual_for(db, p.neighbor_indices, w2, q) >= p.residual - 1e-6);
        }
    }
}

TEST_CASE("weights are invariant to a common translation") {
    Rng rng(7);
    Matrix<double> nb(5, 12);
    fill_uniform(nb, rng, 1.0);
    Vector<double> q(12);
    fill_uniform(q, rng, 1.0);
    Vector<double> shift(12);
    fill_uniform(shift, rng, 3.0);
    const Vector<double> w = affine_weights(nb, q);
    const Matrix<double> moved = nb.rowwise() + shift.transpose();
    const Vector<double> w2 = affine_weights(moved, q + shift);
    CHECK((w - w2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("duplicate neighbours still give affine weights") {
    RowMatrix<float> m(4, 3);
    m << 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0;
    const VectorXf q = (VectorXf(3) << 0.25f, 0.5f, 0.0f).finished();
    const ProjectionResult p = lle_project(ReprDatabase(m), q, 4);
    CHECK(p.weights.sum() == doctest::Approx(1.0));
    CHECK(p.reconstructed[0] == doctest::Approx(0.25));
    CHECK(p.reconstructed[1] == doctest::Approx(0.0));
    CHECK(p.residual == doctest::Approx(0.5));
}

TEST_CASE("database construction and files") {
    Rng rng(8);
    std::vector<VectorXf> rows = {random_query(4, rng)};
    CHECK(build_database(rows).rows() == 1);
    rows.push_back(rows[0]);
    const ReprDatabase db = build_database(rows);
    CHECK(db.rows() == 2);
    CHECK(db.features().row(0) == db.features().row(1));
    CHECK_THROWS_AS(build_database({}), DataError);
    rows.push_back(VectorXf::Constant(4, std::nanf("")));
    CHECK_THROWS_AS(build_database(rows), DataError);

    const auto dir = std::filesystem::temp_directory_path();
    const auto raw = dir / "talkhead_test_db.f32";
    const ReprDatabase big = random_db(30, 7, rng);
    big.save_raw(raw);
    CHECK(std::filesystem::exists(raw.string() + ".json"));
    CHECK(ReprDatabase::load(raw).features() == big.features());

    const auto packed = dir / "talkhead_test_db.bin";
    WeightStore s;
    big.to_store(s);
    save_weights(s, packed);
    CHECK(ReprDatabase::load(packed).features() == big.features());

    std::filesystem::remove(raw.string() + ".json");
    CHECK_THROWS_AS(ReprDatabase::load(raw), DataError);
    std::filesystem::remove(raw);
    std::filesystem::remove(packed);
}
