#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "gtrk/common.hpp"

namespace gtrk {

struct Dataset {
    Eigen::MatrixXd X;       // rows x features
    std::vector<int> y;      // labels (people counts)
    std::vector<int> track_id;
    std::vector<int> frame;

    int rows() const { return static_cast<int>(X.rows()); }
    int dims() const { return static_cast<int>(X.cols()); }

    Dataset select(std::span<const int> idx) const {
        Dataset out;
        out.X.resize(static_cast<int>(idx.size()), X.cols());
        for (size_t i = 0; i < idx.size(); ++i) {
            out.X.row(static_cast<int>(i)) = X.row(idx[i]);
            out.y.push_back(y[static_cast<size_t>(idx[i])]);
            if (!track_id.empty()) out.track_id.push_back(track_id[static_cast<size_t>(idx[i])]);
            if (!frame.empty()) out.frame.push_back(frame[static_cast<size_t>(idx[i])]);
        }
        return out;
    }
};

// 70/30 split stratified by label; no row lands in both halves.
inline std::pair<Dataset, Dataset> split_stratified(const Dataset& ds, double train_fraction,
                                                    std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_stratified: fraction must be in (0,1)");
    std::map<int, std::vector<int>> by_label;
    for (int i = 0; i < ds.rows(); ++i) by_label[ds.y[static_cast<size_t>(i)]].push_back(i);
    std::mt19937_64 rng = make_rng(seed, 31);
    std::vector<int> train_idx, test_idx;
    for (auto& [label, idx] : by_label) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const size_t n_train = static_cast<size_t>(std::lround(train_fraction * idx.size()));
        for (size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train_idx : test_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {ds.select(train_idx), ds.select(test_idx)};
}

// z-score scaler fitted on the training split.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    void fit(const Eigen::MatrixXd& X) {
        mean = X.colwise().mean();
        Eigen::VectorXd var = Eigen::VectorXd::Zero(X.cols());
        for (int i = 0; i < X.rows(); ++i) {
            const Eigen::VectorXd d = X.row(i).transpose() - mean;
            var += d.cwiseProduct(d);
        }
        var /= std::max(1, static_cast<int>(X.rows()));
        scale = var.cwiseSqrt().cwiseMax(1e-12);
    }
    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean.transpose()).array().rowwise() /
               scale.transpose().array();
    }
    Eigen::VectorXd transform_one(const Eigen::VectorXd& x) const {
        return (x - mean).cwiseQuotient(scale);
    }

    nlohmann::json to_json() const {
        return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
                {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
    }
    static Standardizer from_json(const nlohmann::json& j) {
        Standardizer s;
        const auto m = j.at("mean").get<std::vector<double>>();
        const auto sc = j.at("scale").get<std::vector<double>>();
        s.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<int>(m.size()));
        s.scale = Eigen::Map<const Eigen::VectorXd>(sc.data(), static_cast<int>(sc.size()));
        return s;
    }
};

struct TrainParams {
    int knn_k = 5;
    double svm_c = 1.0;
    double svm_kernel_scale = 4.5;  // K(x,z) = exp(-||x-z||^2 / scale^2)
    double svm_tol = 1e-3;
    int rf_trees = 100;
    int rf_min_leaf = 1;
    std::uint64_t seed = 0;
};

struct Prediction {
    int label = 0;
    std::vector<std::pair<int, double>> scores;  // (class, score), scores sum to 1
};

class Classifier {
  public:
    virtual ~Classifier() = default;
    virtual std::string method() const = 0;
    virtual Prediction predict_one(const Eigen::VectorXd& x) const = 0;
    virtual nlohmann::json to_json() const = 0;
    int feature_dim() const { return feature_dim_; }
    const std::vector<int>& classes() const { return classes_; }

    int predict(const Eigen::VectorXd& x) const { return predict_one(x).label; }
    std::vector<int> predict_batch(const Eigen::MatrixXd& X) const {
        std::vector<int> out;
        out.reserve(static_cast<size_t>(X.rows()));
        for (int i = 0; i < X.rows(); ++i) out.push_back(predict(X.row(i).transpose()));
        return out;
    }

  protected:
    void check_dim(const Eigen::VectorXd& x) const {
        if (static_cast<int>(x.size()) != feature_dim_)
            throw std::invalid_argument("predict: feature dimension/mode mismatch (got " +
                                        std::to_string(x.size()) + ", model wants " +
                                        std::to_string(feature_dim_) + ")");
    }
    int feature_dim_ = 0;
    std::vector<int> classes_;
    Standardizer scaler_;
};

namespace detail {

inline void validate_training_data(const Dataset& ds) {
    if (ds.rows() < 2) throw std::invalid_argument("train: not enough rows");
    std::set<int> cls(ds.y.begin(), ds.y.end());
    if (cls.size() < 2) throw std::invalid_argument("train: single-class dataset");
    std::vector<int> bad;
    for (int i = 0; i < ds.rows(); ++i)
        if (!ds.X.row(i).allFinite()) bad.push_back(i);
    if (!bad.empty()) {
        std::ostringstream os;
        os << "train: non-finite features in rows:";
        for (size_t i = 0; i < bad.size() && i < 16; ++i) os << ' ' << bad[i];
        if (bad.size() > 16) os << " ... (" << bad.size() << " total)";
        throw std::invalid_argument(os.str());
    }
}

inline std::vector<std::pair<int, double>> normalize_scores(std::map<int, double> raw) {
    double total = 0.0;
    for (auto& [c, v] : raw) total += v;
    std::vector<std::pair<int, double>> out;
    for (auto& [c, v] : raw) out.emplace_back(c, total > 0.0 ? v / total : 0.0);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// k-nearest neighbors (distance-weighted votes)
// ---------------------------------------------------------------------------

class KnnClassifier : public Classifier {
  public:
    static std::unique_ptr<KnnClassifier> train(const Dataset& ds, const TrainParams& p) {
        detail::validate_training_data(ds);
        auto m = std::make_unique<KnnClassifier>();
        m->k_ = p.knn_k;
        m->scaler_.fit(ds.X);
        m->Xz_ = m->scaler_.transform(ds.X);
        m->y_ = ds.y;
        m->feature_dim_ = ds.dims();
        std::set<int> cls(ds.y.begin(), ds.y.end());
        m->classes_.assign(cls.begin(), cls.end());
        return m;
    }

    std::string method() const override { return "knn"; }

    Prediction predict_one(const Eigen::VectorXd& x) const override {
        check_dim(x);
        const Eigen::VectorXd xz = scaler_.transform_one(x);
        std::vector<std::pair<double, int>> d;  // (distance, row)
        d.reserve(static_cast<size_t>(Xz_.rows()));
        for (int i = 0; i < Xz_.rows(); ++i)
            d.emplace_back((Xz_.row(i).transpose() - xz).norm(), i);
        const size_t k = std::min<size_t>(static_cast<size_t>(k_), d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<long>(k), d.end());
        std::map<int, double> votes;
        for (size_t i = 0; i < k; ++i)
            votes[y_[static_cast<size_t>(d[i].second)]] += 1.0 / (d[i].first + 1e-9);
        Prediction pred;
        pred.scores = detail::normalize_scores(votes);
        double best = -1.0;
        for (const auto& [c, v] : pred.scores)
            if (v > best) {
                best = v;
                pred.label = c;
            }
        return pred;
    }

    nlohmann::json to_json() const override {
        nlohmann::json j;
        j["method"] = "knn";
        j["k"] = k_;
        j["scaler"] = scaler_.to_json();
        j["y"] = y_;
        j["classes"] = classes_;
        j["dim"] = feature_dim_;
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < Xz_.rows(); ++i) {
            const Eigen::VectorXd r = Xz_.row(i).transpose();
            rows.emplace_back(r.data(), r.data() + r.size());
        }
        j["X"] = rows;
        return j;
    }
    static std::unique_ptr<KnnClassifier> from_json(const nlohmann::json& j) {
        auto m = std::make_unique<KnnClassifier>();
        m->k_ = j.at("k").get<int>();
        m->scaler_ = Standardizer::from_json(j.at("scaler"));
        m->y_ = j.at("y").get<std::vector<int>>();
        m->classes_ = j.at("classes").get<std::vector<int>>();
        m->feature_dim_ = j.at("dim").get<int>();
        const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
        m->Xz_.resize(static_cast<int>(rows.size()), m->feature_dim_);
        for (size_t i = 0; i < rows.size(); ++i)
            m->Xz_.row(static_cast<int>(i)) =
                Eigen::Map<const Eigen::VectorXd>(rows[i].data(), m->feature_dim_).transpose();
        return m;
    }

  private:
    int k_ = 5;
    Eigen::MatrixXd Xz_;
    std::vector<int> y_;
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

class NaiveBayesClassifier : public Classifier {
  public:
    static std::unique_ptr<NaiveBayesClassifier> train(const Dataset& ds, const TrainParams&) {
        detail::validate_training_data(ds);
        auto m = std::make_unique<NaiveBayesClassifier>();
        m->scaler_.fit(ds.X);
        const Eigen::MatrixXd Xz = m->scaler_.transform(ds.X);
        m->feature_dim_ = ds.dims();
        std::map<int, std::vector<int>> by_label;
        for (int i = 0; i < ds.rows(); ++i) by_label[ds.y[static_cast<size_t>(i)]].push_back(i);
        for (auto& [label, idx] : by_label) {
            ClassStats st;
            st.label = label;
            st.log_prior = std::log(static_cast<double>(idx.size()) / ds.rows());
            st.mean = Eigen::VectorXd::Zero(ds.dims());
            st.var = Eigen::VectorXd::Zero(ds.dims());
            for (int i : idx) st.mean += Xz.row(i).transpose();
            st.mean /= static_cast<double>(idx.size());
            for (int i : idx) {
                const Eigen::VectorXd d = Xz.row(i).transpose() - st.mean;
                st.var += d.cwiseProduct(d);
            }
            st.var = (st.var / static_cast<double>(idx.size())).cwiseMax(1e-9);
            m->stats_.push_back(std::move(st));
            m->classes_.push_back(label);
        }
        return m;
    }

    std::string method() const override { return "naive_bayes"; }

    Prediction predict_one(const Eigen::VectorXd& x) const override {
        check_dim(x);
        const Eigen::VectorXd xz = scaler_.transform_one(x);
        std::vector<double> logp;
        for (const ClassStats& st : stats_) {
            double lp = st.log_prior;
            for (int d = 0; d < xz.size(); ++d) {
                const double diff = xz(d) - st.mean(d);
                lp += -0.5 * std::log(2.0 * kPi * st.var(d)) - 0.5 * diff * diff / st.var(d);
            }
            logp.push_back(lp);
        }
        const double mx = *std::max_element(logp.begin(), logp.end());
        std::map<int, double> scores;
        for (size_t i = 0; i < stats_.size(); ++i) scores[stats_[i].label] = std::exp(logp[i] - mx);
        Prediction pred;
        pred.scores = detail::normalize_scores(scores);
        double best = -1.0;
        for (const auto& [c, v] : pred.scores)
            if (v > best) {
                best = v;
                pred.label = c;
            }
        return pred;
    }

    nlohmann::json to_json() const override {
        nlohmann::json j;
        j["method"] = "naive_bayes";
        j["scaler"] = scaler_.to_json();
        j["classes"] = classes_;
        j["dim"] = feature_dim_;
        nlohmann::json st = nlohmann::json::array();
        for (const ClassStats& s : stats_) {
            st.push_back({{"label", s.label},
                          {"log_prior", s.log_prior},
                          {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                          {"var", std::vector<double>(s.var.data(), s.var.data() + s.var.size())}});
        }
        j["stats"] = st;
        return j;
    }
    static std::unique_ptr<NaiveBayesClassifier> from_json(const nlohmann::json& j) {
        auto m = std::make_unique<NaiveBayesClassifier>();
        m->scaler_ = Standardizer::from_json(j.at("scaler"));
        m->classes_ = j.at("classes").get<std::vector<int>>();
        m->feature_dim_ = j.at("dim").get<int>();
        for (const auto& s : j.at("stats")) {
            ClassStats st;
            st.label = s.at("label").get<int>();
            st.log_prior = s.at("log_prior").get<double>();
            const auto mv = s.at("mean").get<std::vector<double>>();
            const auto vv = s.at("var").get<std::vector<double>>();
            st.mean = Eigen::Map<const Eigen::VectorXd>(mv.data(), static_cast<int>(mv.size()));
            st.var = Eigen::Map<const Eigen::VectorXd>(vv.data(), static_cast<int>(vv.size()));
            m->stats_.push_back(std::move(st));
        }
        return m;
    }

  private:
    struct ClassStats {
        int label;
        double log_prior;
        Eigen::VectorXd mean, var;
    };
    std::vector<ClassStats> stats_;
};

// ---------------------------------------------------------------------------
// SVM with Gaussian kernel, trained by SMO on the hinge-loss dual
// ---------------------------------------------------------------------------

// Binary soft-margin SVM. Kernel K(x,z) = exp(-||x-z||^2 / scale^2) following
// the kernel-scale convention; C is the box constraint.
class SmoBinarySvm {
  public:
    void train(const Eigen::MatrixXd& X, std::span<const int> y, double C, double kernel_scale,
               double tol) {
        const int n = static_cast<int>(X.rows());
        X_ = X;
        y_.assign(y.begin(), y.end());
        C_ = C;
        gamma_ = 1.0 / (kernel_scale * kernel_scale);
        tol_ = tol;
        alpha_.assign(static_cast<size_t>(n), 0.0);
        b_ = 0.0;
        dual_trace_.clear();

        K_.resize(n, n);
        for (int i = 0; i < n; ++i) {
            K_(i, i) = 1.0;
            for (int j = i + 1; j < n; ++j) {
                const double k = kernel(X_.row(i), X_.row(j));
                K_(i, j) = k;
                K_(j, i) = k;
            }
        }
        E_.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) E_[static_cast<size_t>(i)] = -y_[static_cast<size_t>(i)];  // u = 0 initially

        int num_changed = 0;
        bool examine_all = true;
        int passes = 0;
        const int max_passes = 400;
        while ((num_changed > 0 || examine_all) && passes < max_passes) {
            num_changed = 0;
            if (examine_all) {
                for (int i = 0; i < n; ++i) num_changed += examine(i);
            } else {
                for (int i = 0; i < n; ++i)
                    if (alpha_[static_cast<size_t>(i)] > 0.0 && alpha_[static_cast<size_t>(i)] < C_) num_changed += examine(i);
            }
            if (examine_all) examine_all = false;
            else if (num_changed == 0) examine_all = true;
            dual_trace_.push_back(dual_objective());
            ++passes;
        }
    }

    double decision(const Eigen::VectorXd& x) const {
        double u = -b_;
        for (size_t i = 0; i < alpha_.size(); ++i) {
            if (alpha_[i] == 0.0) continue;
            u += alpha_[i] * y_[i] * kernel(X_.row(static_cast<int>(i)), x.transpose());
        }
        return u;
    }

    double dual_objective() const {
        // W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij, using the error
        // cache: sum_j a_j y_j K_ij = u_i + b = E_i + y_i + b.
        double w = 0.0;
        for (size_t i = 0; i < alpha_.size(); ++i) {
            w += alpha_[i];
            if (alpha_[i] != 0.0)
                w -= 0.5 * alpha_[i] * y_[i] * (E_[i] + y_[i] + b_);
        }
        return w;
    }

    // Largest KKT violation over all points at convergence.
    double max_kkt_violation() const {
        double worst = 0.0;
        for (size_t i = 0; i < alpha_.size(); ++i) {
            const double r = y_[i] * (E_[i] + y_[i]) - 1.0;  // y*u - 1
            if (alpha_[i] < 1e-12) worst = std::max(worst, -r);
            else if (alpha_[i] > C_ - 1e-12) worst = std::max(worst, r);
            else worst = std::max(worst, std::abs(r));
        }
        return worst;
    }

    const std::vector<double>& dual_trace() const { return dual_trace_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        std::vector<std::vector<double>> sv;
        std::vector<double> coef;
        for (size_t i = 0; i < alpha_.size(); ++i) {
            if (alpha_[i] == 0.0) continue;
            const Eigen::VectorXd r = X_.row(static_cast<int>(i)).transpose();
            sv.emplace_back(r.data(), r.data() + r.size());
            coef.push_back(alpha_[i] * y_[i]);
        }
        j["support_vectors"] = sv;
        j["coef"] = coef;
        j["b"] = b_;
        j["gamma"] = gamma_;
        return j;
    }
    static SmoBinarySvm from_json(const nlohmann::json& j) {
        SmoBinarySvm m;
        const auto sv = j.at("support_vectors").get<std::vector<std::vector<double>>>();
        const auto coef = j.at("coef").get<std::vector<double>>();
        const int n = static_cast<int>(sv.size());
        const int d = n > 0 ? static_cast<int>(sv[0].size()) : 0;
        m.X_.resize(n, d);
        for (int i = 0; i < n; ++i)
            m.X_.row(i) = Eigen::Map<const Eigen::VectorXd>(sv[static_cast<size_t>(i)].data(), d).transpose();
        m.alpha_.assign(static_cast<size_t>(n), 0.0);
        m.y_.assign(static_cast<size_t>(n), 1);
        for (int i = 0; i < n; ++i) {
            m.alpha_[static_cast<size_t>(i)] = std::abs(coef[static_cast<size_t>(i)]);
            m.y_[static_cast<size_t>(i)] = coef[static_cast<size_t>(i)] >= 0.0 ? 1 : -1;
        }
        m.b_ = j.at("b").get<double>();
        m.gamma_ = j.at("gamma").get<double>();
        return m;
    }

  private:
    template <typename A, typename B>
    double kernel(const A& a, const B& b) const {
        return std::exp(-gamma_ * (a - b).squaredNorm());
    }

    int examine(int i2) {
        const int n = static_cast<int>(alpha_.size());
        const double y2 = y_[static_cast<size_t>(i2)], a2 = alpha_[static_cast<size_t>(i2)], e2 = E_[static_cast<size_t>(i2)];
        const double r2 = e2 * y2;
        if ((r2 < -tol_ && a2 < C_) || (r2 > tol_ && a2 > 0.0)) {
            // Second-choice heuristic: maximize |E1 - E2| over non-bound points.
            int best = -1;
            double best_gap = -1.0;
            for (int i = 0; i < n; ++i) {
                if (i == i2 || alpha_[static_cast<size_t>(i)] <= 0.0 || alpha_[static_cast<size_t>(i)] >= C_) continue;
                const double gap = std::abs(E_[static_cast<size_t>(i)] - e2);
                if (gap > best_gap) {
                    best_gap = gap;
                    best = i;
                }
            }
            if (best >= 0 && take_step(best, i2)) return 1;
            for (int k = 0; k < n; ++k) {
                const int i1 = (i2 + 1 + k) % n;
                if (alpha_[static_cast<size_t>(i1)] > 0.0 && alpha_[static_cast<size_t>(i1)] < C_ && take_step(i1, i2)) return 1;
            }
            for (int k = 0; k < n; ++k) {
                const int i1 = (i2 + 1 + k) % n;
                if (take_step(i1, i2)) return 1;
            }
        }
        return 0;
    }

    bool take_step(int i1, int i2) {
        if (i1 == i2) return false;
        const double a1_old = alpha_[static_cast<size_t>(i1)], a2_old = alpha_[static_cast<size_t>(i2)];
        const int y1 = y_[static_cast<size_t>(i1)], y2 = y_[static_cast<size_t>(i2)];
        const double e1 = E_[static_cast<size_t>(i1)], e2 = E_[static_cast<size_t>(i2)];
        const double s = y1 * y2;
        double L, H;
        if (y1 != y2) {
            L = std::max(0.0, a2_old - a1_old);
            H = std::min(C_, C_ + a2_old - a1_old);
        } else {
            L = std::max(0.0, a1_old + a2_old - C_);
            H = std::min(C_, a1_old + a2_old);
        }
        if (L >= H) return false;
        const double k11 = K_(i1, i1), k12 = K_(i1, i2), k22 = K_(i2, i2);
        const double eta = k11 + k22 - 2.0 * k12;
        double a2_new;
        if (eta > 0.0) {
            a2_new = std::clamp(a2_old + y2 * (e1 - e2) / eta, L, H);
        } else {
            // Degenerate direction; pick the better bound.
            const double f1 = y1 * e1 - a1_old * k11 - s * a2_old * k12;
            const double f2 = y2 * e2 - a2_old * k22 - s * a1_old * k12;
            const double L1 = a1_old + s * (a2_old - L);
            const double H1 = a1_old + s * (a2_old - H);
            const double psiL = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12;
            const double psiH = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12;
            if (psiL < psiH - 1e-12) a2_new = L;
            else if (psiL > psiH + 1e-12) a2_new = H;
            else return false;
        }
        if (std::abs(a2_new - a2_old) < 1e-12 * (a2_new + a2_old + 1e-12)) return false;
        const double a1_new = a1_old + s * (a2_old - a2_new);

        const double d1 = y1 * (a1_new - a1_old);
        const double d2 = y2 * (a2_new - a2_old);
        const double b1 = e1 + d1 * k11 + d2 * k12 + b_;
        const double b2 = e2 + d1 * k12 + d2 * k22 + b_;
        double b_new;
        if (a1_new > 0.0 && a1_new < C_) b_new = b1;
        else if (a2_new > 0.0 && a2_new < C_) b_new = b2;
        else b_new = 0.5 * (b1 + b2);

        alpha_[static_cast<size_t>(i1)] = a1_new;
        alpha_[static_cast<size_t>(i2)] = a2_new;
        for (size_t k = 0; k < E_.size(); ++k)
            E_[k] += d1 * K_(i1, static_cast<int>(k)) + d2 * K_(i2, static_cast<int>(k)) -
                     (b_new - b_);
        b_ = b_new;
        return true;
    }

    Eigen::MatrixXd X_;
    Eigen::MatrixXd K_;
    std::vector<int> y_;
    std::vector<double> alpha_, E_;
    std::vector<double> dual_trace_;
    double b_ = 0.0, C_ = 1.0, gamma_ = 1.0, tol_ = 1e-3;
};

// One-vs-one multiclass wrapper around the binary SMO machines.
class SvmClassifier : public Classifier {
  public:
    static std::unique_ptr<SvmClassifier> train(const Dataset& ds, const TrainParams& p) {
        detail::validate_training_data(ds);
        auto m = std::make_unique<SvmClassifier>();
        m->scaler_.fit(ds.X);
        const Eigen::MatrixXd Xz = m->scaler_.transform(ds.X);
        m->feature_dim_ = ds.dims();
        std::set<int> cls(ds.y.begin(), ds.y.end());
        m->classes_.assign(cls.begin(), cls.end());

        for (size_t a = 0; a < m->classes_.size(); ++a) {
            for (size_t b = a + 1; b < m->classes_.size(); ++b) {
                const int ca = m->classes_[a], cb = m->classes_[b];
                std::vector<int> idx;
                for (int i = 0; i < ds.rows(); ++i)
                    if (ds.y[static_cast<size_t>(i)] == ca || ds.y[static_cast<size_t>(i)] == cb) idx.push_back(i);
                Eigen::MatrixXd Xp(static_cast<int>(idx.size()), ds.dims());
                std::vector<int> yp;
                for (size_t i = 0; i < idx.size(); ++i) {
                    Xp.row(static_cast<int>(i)) = Xz.row(idx[i]);
                    yp.push_back(ds.y[static_cast<size_t>(idx[i])] == ca ? 1 : -1);
                }
                PairModel pm;
                pm.pos = ca;
                pm.neg = cb;
                pm.svm.train(Xp, yp, p.svm_c, p.svm_kernel_scale, p.svm_tol);
                m->pairs_.push_back(std::move(pm));
            }
        }
        return m;
    }

    std::string method() const override { return "svm"; }

    Prediction predict_one(const Eigen::VectorXd& x) const override {
        check_dim(x);
        const Eigen::VectorXd xz = scaler_.transform_one(x);
        std::map<int, double> votes;
        std::map<int, double> margin;
        for (int c : classes_) {
            votes[c] = 0.0;
            margin[c] = 0.0;
        }
        for (const PairModel& pm : pairs_) {
            const double d = pm.svm.decision(xz);
            votes[d >= 0.0 ? pm.pos : pm.neg] += 1.0;
            margin[d >= 0.0 ? pm.pos : pm.neg] += std::abs(d);
        }
        Prediction pred;
        pred.scores = detail::normalize_scores(votes);
        double best_v = -1.0, best_m = -1.0;
        for (int c : classes_) {
            if (votes[c] > best_v || (votes[c] == best_v && margin[c] > best_m)) {
                best_v = votes[c];
                best_m = margin[c];
                pred.label = c;
            }
        }
        return pred;
    }

    // Decision value of the (pos, neg) machine, for margin tests.
    double pair_decision(const Eigen::VectorXd& x, int pos, int neg) const {
        const Eigen::VectorXd xz = scaler_.transform_one(x);
        for (const PairModel& pm : pairs_)
            if (pm.pos == pos && pm.neg == neg) return pm.svm.decision(xz);
        throw std::invalid_argument("pair_decision: no such class pair");
    }

    const std::vector<double>& dual_trace(size_t pair_index = 0) const {
        return pairs_.at(pair_index).svm.dual_trace();
    }
    double max_kkt_violation() const {
        double worst = 0.0;
        for (const PairModel& pm : pairs_) worst = std::max(worst, pm.svm.max_kkt_violation());
        return worst;
    }

    nlohmann::json to_json() const override {
        nlohmann::json j;
        j["method"] = "svm";
        j["scaler"] = scaler_.to_json();
        j["classes"] = classes_;
        j["dim"] = feature_dim_;
        nlohmann::json ps = nlohmann::json::array();
        for (const PairModel& pm : pairs_)
            ps.push_back({{"pos", pm.pos}, {"neg", pm.neg}, {"svm", pm.svm.to_json()}});
        j["pairs"] = ps;
        return j;
    }
    static std::unique_ptr<SvmClassifier> from_json(const nlohmann::json& j) {
        auto m = std::make_unique<SvmClassifier>();
        m->scaler_ = Standardizer::from_json(j.at("scaler"));
        m->classes_ = j.at("classes").get<std::vector<int>>();
        m->feature_dim_ = j.at("dim").get<int>();
        for (const auto& pj : j.at("pairs")) {
            PairModel pm;
            pm.pos = pj.at("pos").get<int>();
            pm.neg = pj.at("neg").get<int>();
            pm.svm = SmoBinarySvm::from_json(pj.at("svm"));
            m->pairs_.push_back(std::move(pm));
        }
        return m;
    }

  private:
    struct PairModel {
        int pos, neg;
        SmoBinarySvm svm;
    };
    std::vector<PairModel> pairs_;
};

// ---------------------------------------------------------------------------
// Random forest (Gini, sqrt(d) feature subsampling, bootstrap)
// ---------------------------------------------------------------------------

class RandomForestClassifier : public Classifier {
  public:
    static std::unique_ptr<RandomForestClassifier> train(const Dataset& ds, const TrainParams& p) {
        detail::validate_training_data(ds);
        auto m = std::make_unique<RandomForestClassifier>();
        m->scaler_.fit(ds.X);
        const Eigen::MatrixXd Xz = m->scaler_.transform(ds.X);
        m->feature_dim_ = ds.dims();
        std::set<int> cls(ds.y.begin(), ds.y.end());
        m->classes_.assign(cls.begin(), cls.end());
        m->min_leaf_ = p.rf_min_leaf;

        const int n = ds.rows();
        const int mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(ds.dims()))));
        for (int t = 0; t < p.rf_trees; ++t) {
            std::mt19937_64 rng = make_rng(p.seed, 7000U + static_cast<unsigned>(t));
            std::vector<int> idx(static_cast<size_t>(n));
            std::uniform_int_distribution<int> pick(0, n - 1);
            for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = pick(rng);
            Tree tree;
            m->grow(tree, Xz, ds.y, idx, mtry, rng);
            m->trees_.push_back(std::move(tree));
        }
        return m;
    }

    std::string method() const override { return "random_forest"; }

    Prediction predict_one(const Eigen::VectorXd& x) const override {
        check_dim(x);
        const Eigen::VectorXd xz = scaler_.transform_one(x);
        std::map<int, double> votes;
        for (const Tree& t : trees_) votes[t.classify(xz)] += 1.0;
        Prediction pred;
        pred.scores = detail::normalize_scores(votes);
        double best = -1.0;
        for (const auto& [c, v] : pred.scores)
            if (v > best) {
                best = v;
                pred.label = c;
            }
        return pred;
    }

    nlohmann::json to_json() const override {
        nlohmann::json j;
        j["method"] = "random_forest";
        j["scaler"] = scaler_.to_json();
        j["classes"] = classes_;
        j["dim"] = feature_dim_;
        nlohmann::json ts = nlohmann::json::array();
        for (const Tree& t : trees_) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const Node& nd : t.nodes)
                nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.label});
            ts.push_back(nodes);
        }
        j["trees"] = ts;
        return j;
    }
    static std::unique_ptr<RandomForestClassifier> from_json(const nlohmann::json& j) {
        auto m = std::make_unique<RandomForestClassifier>();
        m->scaler_ = Standardizer::from_json(j.at("scaler"));
        m->classes_ = j.at("classes").get<std::vector<int>>();
        m->feature_dim_ = j.at("dim").get<int>();
        for (const auto& tj : j.at("trees")) {
            Tree t;
            for (const auto& nj : tj) {
                Node nd;
                nd.feature = nj.at(0).get<int>();
                nd.threshold = nj.at(1).get<double>();
                nd.left = nj.at(2).get<int>();
                nd.right = nj.at(3).get<int>();
                nd.label = nj.at(4).get<int>();
                t.nodes.push_back(nd);
            }
            m->trees_.push_back(std::move(t));
        }
        return m;
    }

  private:
    struct Node {
        int feature = -1;  // -1: leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        int label = 0;
    };
    struct Tree {
        std::vector<Node> nodes;
        int classify(const Eigen::VectorXd& x) const {
            int i = 0;
            while (nodes[static_cast<size_t>(i)].feature >= 0)
                i = (x(nodes[static_cast<size_t>(i)].feature) <= nodes[static_cast<size_t>(i)].threshold)
                        ? nodes[static_cast<size_t>(i)].left
                        : nodes[static_cast<size_t>(i)].right;
            return nodes[static_cast<size_t>(i)].label;
        }
    };

    void grow(Tree& tree, const Eigen::MatrixXd& X, const std::vector<int>& y,
              const std::vector<int>& idx, int mtry, std::mt19937_64& rng) const {
        build_node(tree, X, y, idx, mtry, rng);
    }

    int build_node(Tree& tree, const Eigen::MatrixXd& X, const std::vector<int>& y,
                   const std::vector<int>& idx, int mtry, std::mt19937_64& rng) const {
        const int me = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        std::map<int, int> hist;
        for (int i : idx) ++hist[y[static_cast<size_t>(i)]];
        int majority = idx.empty() ? classes_.front() : y[static_cast<size_t>(idx.front())];
        int best_count = -1;
        for (const auto& [c, k] : hist)
            if (k > best_count) {
                best_count = k;
                majority = c;
            }
        const bool pure = hist.size() <= 1;
        if (pure || static_cast<int>(idx.size()) <= 2 * min_leaf_) {
            tree.nodes[static_cast<size_t>(me)].label = majority;
            return me;
        }

        // mtry features without replacement.
        std::vector<int> feats(static_cast<size_t>(X.cols()));
        std::iota(feats.begin(), feats.end(), 0);
        for (int i = 0; i < mtry; ++i) {
            std::uniform_int_distribution<int> pick(i, static_cast<int>(feats.size()) - 1);
            std::swap(feats[static_cast<size_t>(i)], feats[static_cast<size_t>(pick(rng))]);
        }
        feats.resize(static_cast<size_t>(mtry));

        double best_gini = std::numeric_limits<double>::max();
        int best_feat = -1;
        double best_thr = 0.0;
        std::vector<std::pair<double, int>> vals;
        for (int f : feats) {
            vals.clear();
            for (int i : idx) vals.emplace_back(X(i, f), y[static_cast<size_t>(i)]);
            std::sort(vals.begin(), vals.end());
            std::map<int, int> left, right = hist;
            int n_left = 0;
            const int n_total = static_cast<int>(vals.size());
            for (size_t k = 0; k + 1 < vals.size(); ++k) {
                ++left[vals[k].second];
                --right[vals[k].second];
                ++n_left;
                if (vals[k].first == vals[k + 1].first) continue;
                const int n_right = n_total - n_left;
                if (n_left < min_leaf_ || n_right < min_leaf_) continue;
                auto gini = [](const std::map<int, int>& h, int n) {
                    double g = 1.0;
                    for (const auto& [c, k2] : h) {
                        const double p = static_cast<double>(k2) / n;
                        g -= p * p;
                    }
                    return g;
                };
                const double score = (n_left * gini(left, n_left) +
                                      n_right * gini(right, n_right)) / n_total;
                if (score < best_gini - 1e-15) {
                    best_gini = score;
                    best_feat = f;
                    best_thr = 0.5 * (vals[k].first + vals[k + 1].first);
                }
            }
        }
        if (best_feat < 0) {
            tree.nodes[static_cast<size_t>(me)].label = majority;
            return me;
        }
        std::vector<int> li, ri;
        for (int i : idx)
            (X(i, best_feat) <= best_thr ? li : ri).push_back(i);
        if (li.empty() || ri.empty()) {
            tree.nodes[static_cast<size_t>(me)].label = majority;
            return me;
        }
        tree.nodes[static_cast<size_t>(me)].feature = best_feat;
        tree.nodes[static_cast<size_t>(me)].threshold = best_thr;
        const int l = build_node(tree, X, y, li, mtry, rng);
        const int r = build_node(tree, X, y, ri, mtry, rng);
        tree.nodes[static_cast<size_t>(me)].left = l;
        tree.nodes[static_cast<size_t>(me)].right = r;
        return me;
    }

    std::vector<Tree> trees_;
    int min_leaf_ = 1;
};

// ---------------------------------------------------------------------------
// Factory, PCA, label smoothing, evaluation
// ---------------------------------------------------------------------------

inline std::unique_ptr<Classifier> train_classifier(const std::string& method, const Dataset& ds,
                                                    const TrainParams& p = {}) {
    if (method == "knn") return KnnClassifier::train(ds, p);
    if (method == "naive_bayes") return NaiveBayesClassifier::train(ds, p);
    if (method == "svm") return SvmClassifier::train(ds, p);
    if (method == "random_forest") return RandomForestClassifier::train(ds, p);
    throw std::invalid_argument("unknown classifier method: " + method);
}

inline std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& j) {
    const std::string method = j.at("method").get<std::string>();
    if (method == "knn") return KnnClassifier::from_json(j);
    if (method == "naive_bayes") return NaiveBayesClassifier::from_json(j);
    if (method == "svm") return SvmClassifier::from_json(j);
    if (method == "random_forest") return RandomForestClassifier::from_json(j);
    throw std::invalid_argument("unknown classifier method in model file: " + method);
}

struct PcaTransform {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // dims x kept
    std::vector<double> explained_fraction;
    double retained = 0.0;

    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - mean.transpose()) * components;
    }
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& Z) const {
        return (Z * components.transpose()).rowwise() + mean.transpose();
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
        std::vector<std::vector<double>> comp;
        for (int c = 0; c < components.cols(); ++c)
            comp.emplace_back(components.col(c).data(),
                              components.col(c).data() + components.rows());
        j["components"] = comp;
        j["retained"] = retained;
        return j;
    }
    static PcaTransform from_json(const nlohmann::json& j) {
        PcaTransform p;
        const auto mv = j.at("mean").get<std::vector<double>>();
        p.mean = Eigen::Map<const Eigen::VectorXd>(mv.data(), static_cast<int>(mv.size()));
        const auto comp = j.at("components").get<std::vector<std::vector<double>>>();
        p.components.resize(p.mean.size(), static_cast<int>(comp.size()));
        for (size_t c = 0; c < comp.size(); ++c)
            p.components.col(static_cast<int>(c)) =
                Eigen::Map<const Eigen::VectorXd>(comp[c].data(), p.mean.size());
        p.retained = j.at("retained").get<double>();
        return p;
    }
};

// Smallest component count reaching the retained-variance fraction.
inline PcaTransform pca_fit(const Eigen::MatrixXd& X, double retained) {
    if (!(retained > 0.0 && retained <= 1.0))
        throw std::invalid_argument("pca_fit: retained must be in (0,1]");
    if (X.rows() < 2) throw std::invalid_argument("pca_fit: need at least two rows");
    PcaTransform p;
    p.retained = retained;
    p.mean = X.colwise().mean();
    const Eigen::MatrixXd C = (X.rowwise() - p.mean.transpose()).transpose() *
                              (X.rowwise() - p.mean.transpose()) /
                              static_cast<double>(X.rows() - 1);
    const double total = C.trace();
    if (!(total > 1e-15)) throw std::invalid_argument("pca_fit: zero-variance dataset");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    const Eigen::VectorXd ev = es.eigenvalues();
    const Eigen::MatrixXd vecs = es.eigenvectors();  // ascending order
    const int d = static_cast<int>(ev.size());

    int kept = 0;
    double cum = 0.0;
    std::vector<double> fractions;
    for (int i = 0; i < d; ++i) {
        const double frac = std::max(ev(d - 1 - i), 0.0) / total;
        fractions.push_back(frac);
        cum += frac;
        kept = i + 1;
        if (cum >= retained - 1e-12) break;
    }
    p.components.resize(d, kept);
    for (int i = 0; i < kept; ++i) {
        Eigen::VectorXd v = vecs.col(d - 1 - i);
        int arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;  // deterministic sign
        p.components.col(i) = v;
    }
    p.explained_fraction.assign(fractions.begin(), fractions.begin() + kept);
    return p;
}

inline std::pair<PcaTransform, Eigen::MatrixXd> pca_fit_transform(const Eigen::MatrixXd& X,
                                                                  double retained) {
    PcaTransform p = pca_fit(X, retained);
    return {p, p.transform(X)};
}

// Centered median filter; the window shrinks at the sequence edges.
inline std::vector<int> median_smooth(std::span<const int> labels, int window = 25) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("median_smooth: window must be odd and positive");
    const int n = static_cast<int>(labels.size());
    const int h = window / 2;
    std::vector<int> out(static_cast<size_t>(n));
    std::vector<int> buf;
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - h), hi = std::min(n - 1, i + h);
        buf.assign(labels.begin() + lo, labels.begin() + hi + 1);
        std::sort(buf.begin(), buf.end());
        out[static_cast<size_t>(i)] = buf[buf.size() / 2];
    }
    return out;
}

struct EvalResult {
    double accuracy_bm = 0.0;  // frame-level, before median filter
    double accuracy_am = 0.0;  // after per-track median filtering
    Eigen::MatrixXi confusion;  // rows: truth, cols: predicted (class order)
    std::vector<int> class_order;
    int n_rows = 0;
};

inline EvalResult evaluate(const Classifier& model, const Dataset& test, int median_window = 25) {
    if (test.rows() == 0) throw std::invalid_argument("evaluate: empty test split");
    EvalResult res;
    res.n_rows = test.rows();
    std::set<int> cls(test.y.begin(), test.y.end());
    for (int c : model.classes()) cls.insert(c);
    res.class_order.assign(cls.begin(), cls.end());
    auto class_index = [&](int c) {
        return static_cast<int>(std::lower_bound(res.class_order.begin(), res.class_order.end(), c) -
                                res.class_order.begin());
    };
    res.confusion = Eigen::MatrixXi::Zero(static_cast<int>(cls.size()), static_cast<int>(cls.size()));

    const std::vector<int> pred = model.predict_batch(test.X);
    int correct = 0;
    for (int i = 0; i < test.rows(); ++i) {
        if (pred[static_cast<size_t>(i)] == test.y[static_cast<size_t>(i)]) ++correct;
        res.confusion(class_index(test.y[static_cast<size_t>(i)]), class_index(pred[static_cast<size_t>(i)]))++;
    }
    res.accuracy_bm = static_cast<double>(correct) / test.rows();

    // After-median accuracy needs per-track time ordering; fall back to one
    // sequence when no track ids are present.
    std::map<int, std::vector<int>> order;  // track -> row indices
    for (int i = 0; i < test.rows(); ++i) {
        const int tid = test.track_id.empty() ? 0 : test.track_id[static_cast<size_t>(i)];
        order[tid].push_back(i);
    }
    int correct_am = 0;
    for (auto& [tid, rows] : order) {
        std::sort(rows.begin(), rows.end(), [&](int a, int b) {
            const int fa = test.frame.empty() ? a : test.frame[static_cast<size_t>(a)];
            const int fb = test.frame.empty() ? b : test.frame[static_cast<size_t>(b)];
            return fa < fb;
        });
        std::vector<int> seq;
        for (int r : rows) seq.push_back(pred[static_cast<size_t>(r)]);
        const std::vector<int> sm = median_smooth(seq, median_window);
        for (size_t k = 0; k < rows.size(); ++k)
            if (sm[k] == test.y[static_cast<size_t>(rows[k])]) ++correct_am;
    }
    res.accuracy_am = static_cast<double>(correct_am) / test.rows();
    return res;
}

}  // namespace gtrk
