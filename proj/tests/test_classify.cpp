#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "gtrk/classify.hpp"

using namespace gtrk;

namespace {

// Gaussian blobs, one per class center, optional feature correlation.
Dataset make_blobs(const std::vector<Eigen::VectorXd>& centers, int per_class, double sigma,
                   std::uint64_t seed, double shared_noise = 0.0) {
    std::mt19937_64 rng = make_rng(seed, 3);
    std::normal_distribution<double> g;
    const int d = static_cast<int>(centers[0].size());
    Dataset ds;
    ds.X.resize(static_cast<int>(centers.size()) * per_class, d);
    int row = 0;
    for (size_t c = 0; c < centers.size(); ++c) {
        for (int i = 0; i < per_class; ++i) {
            const double s = shared_noise * g(rng);
            for (int k = 0; k < d; ++k) ds.X(row, k) = centers[c](k) + sigma * g(rng) + s;
            ds.y.push_back(static_cast<int>(c) + 1);
            ds.track_id.push_back(static_cast<int>(c));
            ds.frame.push_back(i);
            ++row;
        }
    }
    return ds;
}

std::vector<Eigen::VectorXd> three_centers(int dims, double gap) {
    std::vector<Eigen::VectorXd> c(3, Eigen::VectorXd::Zero(dims));
    for (int k = 0; k < dims; ++k) {
        c[1](k) = gap * ((k % 2) ? 1.0 : 0.5);
        c[2](k) = gap * ((k % 3) ? -0.8 : 1.2);
    }
    return c;
}

double training_accuracy(const Classifier& m, const Dataset& ds) {
    const auto pred = m.predict_batch(ds.X);
    int ok = 0;
    for (int i = 0; i < ds.rows(); ++i)
        if (pred[static_cast<size_t>(i)] == ds.y[static_cast<size_t>(i)]) ++ok;
    return static_cast<double>(ok) / ds.rows();
}

}  // namespace

TEST_CASE("stratified split keeps proportions and separates rows") {
    Dataset ds = make_blobs(three_centers(4, 3.0), 100, 0.5, 1);
    const auto [train, test] = split_stratified(ds, 0.7, 11);
    REQUIRE(train.rows() == 210);
    REQUIRE(test.rows() == 90);
    for (int label = 1; label <= 3; ++label) {
        const auto count = [&](const Dataset& d) {
            int n = 0;
            for (int v : d.y) n += (v == label);
            return n;
        };
        REQUIRE(count(train) == 70);
        REQUIRE(count(test) == 30);
    }
}

TEST_CASE("SVM separates two linearly separable clouds perfectly") {
    std::vector<Eigen::VectorXd> centers(2, Eigen::VectorXd::Zero(3));
    centers[1] = Eigen::VectorXd::Constant(3, 5.0);
    Dataset ds = make_blobs(centers, 60, 0.4, 5);
    const auto m = SvmClassifier::train(ds, {});
    REQUIRE(training_accuracy(*m, ds) == 1.0);
}

TEST_CASE("KNN with k = 1 memorizes its training set") {
    Dataset ds = make_blobs(three_centers(5, 2.0), 40, 0.8, 6);
    TrainParams p;
    p.knn_k = 1;
    const auto m = KnnClassifier::train(ds, p);
    REQUIRE(training_accuracy(*m, ds) == 1.0);
    // A training exemplar predicts its own label.
    const Prediction pr = m->predict_one(ds.X.row(17).transpose());
    REQUIRE(pr.label == ds.y[17]);
}

TEST_CASE("naive Bayes threshold between N(0,1) and N(4,1) sits at 2") {
    std::mt19937_64 rng = make_rng(44, 0);
    std::normal_distribution<double> g;
    Dataset ds;
    const int n = 4000;
    ds.X.resize(2 * n, 1);
    for (int i = 0; i < n; ++i) {
        ds.X(i, 0) = g(rng);
        ds.y.push_back(1);
    }
    for (int i = 0; i < n; ++i) {
        ds.X(n + i, 0) = 4.0 + g(rng);
        ds.y.push_back(2);
    }
    const auto m = NaiveBayesClassifier::train(ds, {});
    double threshold = 0.0;
    for (double x = 0.0; x <= 4.0; x += 0.005) {
        Eigen::VectorXd v(1);
        v << x;
        if (m->predict(v) == 2) {
            threshold = x;
            break;
        }
    }
    REQUIRE(threshold == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("SVM pushes far points beyond the margin") {
    std::vector<Eigen::VectorXd> centers(2, Eigen::VectorXd::Zero(2));
    centers[1] = Eigen::VectorXd::Constant(2, 6.0);
    Dataset ds = make_blobs(centers, 50, 0.5, 7);
    const auto m = SvmClassifier::train(ds, {});
    Eigen::VectorXd far_pos = Eigen::VectorXd::Constant(2, -4.0);  // deep in class 1
    REQUIRE(m->predict(far_pos) == 1);
    REQUIRE(m->pair_decision(far_pos, 1, 2) > 1.0);
}

TEST_CASE("scores are normalized and batch prediction is deterministic") {
    Dataset ds = make_blobs(three_centers(4, 3.0), 30, 0.6, 8);
    for (const char* method : {"knn", "naive_bayes", "svm", "random_forest"}) {
        const auto m = train_classifier(method, ds, {});
        const Prediction pr = m->predict_one(ds.X.row(3).transpose());
        double sum = 0.0;
        for (const auto& [c, s] : pr.scores) sum += s;
        REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-9));
        REQUIRE(m->predict_batch(ds.X) == m->predict_batch(ds.X));
    }
}

TEST_CASE("training rejects single-class and non-finite data") {
    Dataset ds;
    ds.X = Eigen::MatrixXd::Random(10, 3);
    ds.y.assign(10, 1);
    REQUIRE_THROWS_AS(KnnClassifier::train(ds, {}), std::invalid_argument);

    ds.y[5] = 2;
    ds.X(4, 2) = std::numeric_limits<double>::quiet_NaN();
    try {
        SvmClassifier::train(ds, {});
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        REQUIRE(std::string(e.what()).find("4") != std::string::npos);  // row report
    }
}

TEST_CASE("feature-dimension (mode) mismatch is rejected at predict time") {
    Dataset ds = make_blobs(three_centers(5, 3.0), 20, 0.5, 9);
    const auto m = train_classifier("knn", ds, {});
    Eigen::VectorXd wrong(3);
    wrong.setZero();
    REQUIRE_THROWS_AS(m->predict(wrong), std::invalid_argument);
}

TEST_CASE("PCA component count, reconstruction, and monotone sweep") {
    std::mt19937_64 rng = make_rng(31, 0);
    std::normal_distribution<double> g;
    // Points on a 2-D plane embedded in 50 dimensions.
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(50, 2);
    for (int k = 0; k < 50; ++k) {
        basis(k, 0) = g(rng);
        basis(k, 1) = g(rng);
    }
    Eigen::MatrixXd Z(300, 2);
    for (int i = 0; i < 300; ++i) {
        Z(i, 0) = 3.0 * g(rng);
        Z(i, 1) = 2.8 * g(rng);
    }
    const Eigen::MatrixXd X = Z * basis.transpose();
    const auto [p80, proj] = pca_fit_transform(X, 0.8);
    REQUIRE(p80.components.cols() == 2);
    REQUIRE(proj.rows() == 300);
    // Orthonormal components.
    const Eigen::MatrixXd I = p80.components.transpose() * p80.components;
    REQUIRE((I - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

    const auto [p100, z100] = pca_fit_transform(X, 1.0);
    const Eigen::MatrixXd rec = p100.inverse(z100);
    REQUIRE((rec - X).cwiseAbs().maxCoeff() < 1e-8);

    // Random full-rank data: reconstruction error falls as retained grows.
    Eigen::MatrixXd R(200, 12);
    for (int i = 0; i < 200; ++i)
        for (int k = 0; k < 12; ++k) R(i, k) = g(rng) * (k + 1);
    double prev = 1e300;
    for (double retained : {0.3, 0.5, 0.7, 0.9, 1.0}) {
        const auto [pt, zt] = pca_fit_transform(R, retained);
        const double err = (pt.inverse(zt) - R).squaredNorm();
        REQUIRE(err <= prev + 1e-9);
        prev = err;
    }

    const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(40, 6, 2.5);
    REQUIRE_THROWS_AS(pca_fit(flat, 0.8), std::invalid_argument);
    REQUIRE_THROWS_AS(pca_fit(R, 0.0), std::invalid_argument);
}

TEST_CASE("median smoothing behaviors") {
    const std::vector<int> constant(40, 2);
    REQUIRE(median_smooth(constant, 25) == constant);

    std::vector<int> one_err(40, 2);
    one_err[17] = 3;
    REQUIRE(median_smooth(one_err, 25) == constant);

    // 13 consecutive wrong labels in a window of 25 survive at the run center.
    std::vector<int> long_run(60, 1);
    for (int i = 20; i < 33; ++i) long_run[static_cast<size_t>(i)] = 2;
    const auto sm = median_smooth(long_run, 25);
    REQUIRE(sm[26] == 2);

    // Idempotent on constant-majority sequences.
    std::mt19937_64 rng = make_rng(2, 0);
    std::vector<int> noisy(80, 1);
    for (int i = 0; i < 80; i += 9) noisy[static_cast<size_t>(i)] = 3;
    const auto once = median_smooth(noisy, 25);
    REQUIRE(median_smooth(once, 25) == once);

    REQUIRE_THROWS_AS(median_smooth(constant, 24), std::invalid_argument);
}

namespace {
class ScriptedClassifier : public Classifier {
  public:
    explicit ScriptedClassifier(std::vector<int> labels) : labels_(std::move(labels)) {
        feature_dim_ = 1;
        classes_ = {1, 2};
    }
    std::string method() const override { return "scripted"; }
    Prediction predict_one(const Eigen::VectorXd& x) const override {
        Prediction p;
        p.label = labels_[static_cast<size_t>(std::lround(x(0)))];
        p.scores = {{p.label, 1.0}};
        return p;
    }
    nlohmann::json to_json() const override { return {}; }

  private:
    std::vector<int> labels_;
};
}  // namespace

TEST_CASE("evaluate: BM counts raw errors, AM forgives isolated ones") {
    const int n = 100;
    Dataset test;
    test.X.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        test.X(i, 0) = i;
        test.y.push_back(1);
        test.track_id.push_back(7);
        test.frame.push_back(i);
    }
    std::vector<int> script(n, 1);
    script[50] = 2;  // one isolated wrong frame
    const ScriptedClassifier m(script);
    const EvalResult r = evaluate(m, test);
    REQUIRE(r.accuracy_bm == Catch::Approx(0.99));
    REQUIRE(r.accuracy_am == Catch::Approx(1.0));
    REQUIRE(r.confusion(0, 0) == 99);
    REQUIRE(r.confusion(0, 1) == 1);

    std::vector<int> perfect(n, 1);
    const EvalResult rp = evaluate(ScriptedClassifier(perfect), test);
    REQUIRE(rp.accuracy_bm == 1.0);
    REQUIRE(rp.accuracy_am == 1.0);
}

TEST_CASE("SVM is at least as accurate as naive Bayes on entangled classes") {
    // Class 1 occupies two opposite blobs of a checkerboard, class 2 the other
    // two, so no per-feature independent model separates them.
    std::mt19937_64 rng = make_rng(13, 0);
    std::normal_distribution<double> g;
    Dataset ds;
    const int per_blob = 90;
    ds.X.resize(4 * per_blob, 5);
    const double blobs[4][3] = {{0, 0, 1}, {4, 4, 1}, {0, 4, 2}, {4, 0, 2}};
    int row = 0;
    for (const auto& b : blobs) {
        for (int i = 0; i < per_blob; ++i) {
            ds.X(row, 0) = b[0] + 0.8 * g(rng);
            ds.X(row, 1) = b[1] + 0.8 * g(rng);
            for (int k = 2; k < 5; ++k) ds.X(row, k) = g(rng);
            ds.y.push_back(static_cast<int>(b[2]));
            ds.track_id.push_back(0);
            ds.frame.push_back(row);
            ++row;
        }
    }
    const auto [train, test] = split_stratified(ds, 0.7, 5);
    const auto svm = SvmClassifier::train(train, {});
    const auto nb = NaiveBayesClassifier::train(train, {});
    const double acc_svm = evaluate(*svm, test).accuracy_bm;
    const double acc_nb = evaluate(*nb, test).accuracy_bm;
    REQUIRE(acc_svm >= acc_nb);
    REQUIRE(acc_svm > 0.9);
}

TEST_CASE("well-separated three-class problem: SVM above 95 percent") {
    Dataset ds = make_blobs(three_centers(10, 4.0), 120, 1.0, 17);
    const auto [train, test] = split_stratified(ds, 0.7, 3);
    const auto svm = SvmClassifier::train(train, {});
    REQUIRE(evaluate(*svm, test).accuracy_bm >= 0.95);
}

TEST_CASE("SMO dual objective is monotone and KKT conditions hold") {
    Dataset ds = make_blobs(
        {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Constant(4, 2.0)}, 80, 1.0, 19);
    const auto svm = SvmClassifier::train(ds, {});
    const auto& trace = svm->dual_trace(0);
    REQUIRE(trace.size() >= 2);
    for (size_t i = 1; i < trace.size(); ++i) REQUIRE(trace[i] >= trace[i - 1] - 1e-9);
    REQUIRE(svm->max_kkt_violation() < 5e-3);
}

TEST_CASE("rescaling a raw feature column leaves KNN and SVM predictions unchanged") {
    Dataset ds = make_blobs(three_centers(6, 2.5), 60, 0.8, 23);
    Dataset scaled = ds;
    scaled.X.col(2) = ds.X.col(2) * 37.0;
    scaled.X.col(4) = (ds.X.col(4).array() * -0.01 + 5.0).matrix();

    Eigen::MatrixXd probes = ds.X.topRows(40);
    Eigen::MatrixXd probes_scaled = scaled.X.topRows(40);

    const auto knn_a = KnnClassifier::train(ds, {});
    const auto knn_b = KnnClassifier::train(scaled, {});
    for (int i = 0; i < probes.rows(); ++i)
        REQUIRE(knn_a->predict(probes.row(i).transpose()) ==
                knn_b->predict(probes_scaled.row(i).transpose()));

    const auto svm_a = SvmClassifier::train(ds, {});
    const auto svm_b = SvmClassifier::train(scaled, {});
    for (int i = 0; i < probes.rows(); ++i)
        REQUIRE(svm_a->predict(probes.row(i).transpose()) ==
                svm_b->predict(probes_scaled.row(i).transpose()));
}

TEST_CASE("model serialization round-trips exactly") {
    Dataset ds = make_blobs(three_centers(5, 3.0), 40, 0.7, 29);
    for (const char* method : {"knn", "naive_bayes", "svm", "random_forest"}) {
        const auto m = train_classifier(method, ds, {});
        const nlohmann::json j = m->to_json();
        const auto back = classifier_from_json(j);
        REQUIRE(back->method() == m->method());
        REQUIRE(back->to_json().dump() == j.dump());  // byte-exact re-dump
        for (int i = 0; i < 30; ++i) {
            const Prediction a = m->predict_one(ds.X.row(i).transpose());
            const Prediction b = back->predict_one(ds.X.row(i).transpose());
            REQUIRE(a.label == b.label);
            REQUIRE(a.scores.size() == b.scores.size());
            for (size_t k = 0; k < a.scores.size(); ++k) {
                REQUIRE(a.scores[k].first == b.scores[k].first);
                REQUIRE(a.scores[k].second == Catch::Approx(b.scores[k].second).margin(1e-12));
            }
        }
    }
}

TEST_CASE("random forest learns an axis-aligned rule KNN handles too") {
    // Labels decided by a threshold on one feature.
    std::mt19937_64 rng = make_rng(37, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset ds;
    ds.X.resize(400, 6);
    for (int i = 0; i < 400; ++i) {
        for (int k = 0; k < 6; ++k) ds.X(i, k) = u(rng);
        ds.y.push_back(ds.X(i, 2) > 0.1 ? 2 : 1);
    }
    TrainParams p;
    p.rf_trees = 60;
    p.seed = 4;
    const auto rf = RandomForestClassifier::train(ds, p);
    REQUIRE(training_accuracy(*rf, ds) > 0.98);
}
