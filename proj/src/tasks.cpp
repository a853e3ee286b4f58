// Copyright (c) 2026 the deltalora authors
// SPDX-License-Identifier: Apache-2.0

#include "deltalora/tasks.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace deltalora {

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64ULL;
constexpr std::uint64_t kPerturbStream = 0x706572ULL;
constexpr std::uint64_t kTrainDataStream = 0x747261ULL;
constexpr std::uint64_t kEvalDataStream = 0x657661ULL;
constexpr std::uint64_t kBatchStream = 0x626174ULL;

// Adds a perturbation of recorded rank and relative Frobenius norm to w.
void perturb_weight(Matrix& w, const TsTaskSpec& spec, Rng& rng) {
    const double base_norm = frobenius_norm(w);
    if (spec.perturb_rank > 0 && spec.perturb_scale > 0.0) {
        Matrix u = gaussian_matrix(w.rows(), spec.perturb_rank, rng);
        Matrix v = gaussian_matrix(spec.perturb_rank, w.cols(), rng);
        Matrix low = matmul(u, v);
        add_scaled(w, spec.perturb_scale * base_norm / frobenius_norm(low), low);
    }
    if (spec.dense_noise_scale > 0.0) {
        Matrix dense = gaussian_matrix(w.rows(), w.cols(), rng);
        add_scaled(w, spec.dense_noise_scale * base_norm / frobenius_norm(dense), dense);
    }
}

} // namespace

TeacherStudentTask::TeacherStudentTask(std::uint64_t seed, const TsTaskSpec& spec)
    : spec_(spec), seed_(seed) {
    if (spec.tokens < 1 || spec.n_train < 1 || spec.n_eval < 0 || spec.noise_std < 0.0) {
        throw std::invalid_argument("TeacherStudentTask: invalid sample spec");
    }
    target_ = make_model(spec.dims, mix64(seed, kModelStream));
    pretrained_ = target_;
    Rng perturb_rng(mix64(seed, kPerturbStream));
    for (auto& block : pretrained_.blocks) {
        perturb_weight(block.mha.wq.w, spec, perturb_rng);
        perturb_weight(block.mha.wv.w, spec, perturb_rng);
    }

    const auto gen_split = [&](int count, std::uint64_t stream, std::vector<Matrix>& xs,
                               std::vector<Matrix>& ys) {
        Rng rng(mix64(seed, stream));
        xs.reserve(count);
        ys.reserve(count);
        for (int i = 0; i < count; ++i) {
            Matrix x = gaussian_matrix(spec.tokens, spec.dims.width, rng);
            ModelCache cache;
            Matrix y = model_forward(target_, x, cache);
            if (spec.noise_std > 0.0) {
                for (std::size_t j = 0; j < y.size(); ++j)
                    y.data()[j] += spec.noise_std * rng.next_gaussian();
            }
            xs.push_back(std::move(x));
            ys.push_back(std::move(y));
        }
    };
    gen_split(spec.n_train, kTrainDataStream, train_x_, train_y_);
    gen_split(spec.n_eval, kEvalDataStream, eval_x_, eval_y_);
}

std::vector<int> TeacherStudentTask::batch_indices(std::uint64_t seed, long step,
                                                   int batch_size) const {
    Rng rng(mix64(mix64(seed, kBatchStream), static_cast<std::uint64_t>(step)));
    std::vector<int> idx(batch_size);
    for (int& i : idx) i = rng.next_index(static_cast<int>(train_x_.size()));
    return idx;
}

double TeacherStudentTask::batch_step(const ToyModel& model, std::uint64_t seed, long step,
                                      int batch_size, GradMap* grads, Rng* drop_rng) const {
    const std::vector<int> idx = batch_indices(seed, step, batch_size);
    double loss = 0.0;
    for (int i : idx) {
        ModelCache cache;
        Matrix out = model_forward(model, train_x_[i], cache, grads != nullptr, drop_rng);
        Matrix g;
        loss += loss_mse(out, train_y_[i], g);
        if (grads != nullptr) model_backward(model, cache, g, *grads);
    }
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    if (grads != nullptr) {
        for (auto& [name, g] : *grads) scale_in_place(g, inv_b);
    }
    return loss * inv_b;
}

double TeacherStudentTask::eval_loss(const ToyModel& model) const {
    if (eval_x_.empty()) return std::numeric_limits<double>::quiet_NaN();
    double loss = 0.0;
    for (std::size_t i = 0; i < eval_x_.size(); ++i) {
        ModelCache cache;
        Matrix out = model_forward(model, eval_x_[i], cache);
        Matrix g;
        loss += loss_mse(out, eval_y_[i], g);
    }
    return loss / static_cast<double>(eval_x_.size());
}

// -- byte-level language modeling ----------------------------------------------

std::size_t CharLmTask::train_window_count() const {
    const std::size_t need = static_cast<std::size_t>(seq_len) + 1;
    return train_tokens >= need ? train_tokens - need + 1 : 0;
}

std::size_t CharLmTask::eval_window_count() const {
    const std::size_t need = static_cast<std::size_t>(seq_len) + 1;
    return eval_tokens() >= need ? eval_tokens() - need + 1 : 0;
}

CharLmTask load_corpus(const std::string& path, int seq_len, double train_frac) {
    if (seq_len < 1) throw std::invalid_argument("load_corpus: seq_len must be >= 1");
    if (train_frac <= 0.0 || train_frac > 1.0) {
        throw std::invalid_argument("load_corpus: train_frac must be in (0, 1]");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_corpus: cannot read \"" + path + "\"");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("load_corpus: read error on \"" + path + "\"");
    if (bytes.empty()) throw std::invalid_argument("load_corpus: \"" + path + "\" is empty");

    CharLmTask task;
    task.corpus_path = path;
    task.seq_len = seq_len;
    task.train_frac = train_frac;

    int id_of_byte[256];
    for (int& v : id_of_byte) v = -1;
    bool seen[256] = {};
    for (unsigned char b : bytes) seen[b] = true;
    for (int b = 0; b < 256; ++b) {
        if (seen[b]) {
            id_of_byte[b] = task.vocab_size++;
            task.byte_of_id.push_back(static_cast<unsigned char>(b));
        }
    }
    task.tokens.reserve(bytes.size());
    for (unsigned char b : bytes) task.tokens.push_back(id_of_byte[b]);
    task.train_tokens = static_cast<std::size_t>(
        std::floor(train_frac * static_cast<double>(task.tokens.size())));
    return task;
}

CharLmTrainTask::CharLmTrainTask(CharLmTask data, ModelDims dims, std::uint64_t model_seed)
    : data_(std::move(data)) {
    dims.vocab = data_.vocab_size;
    dims.seq_len = data_.seq_len;
    pretrained_ = make_model(dims, model_seed);
    if (data_.train_window_count() == 0) {
        throw std::invalid_argument("CharLmTrainTask: train region of \"" + data_.corpus_path +
                                    "\" has no full window of seq_len " +
                                    std::to_string(data_.seq_len));
    }
}

void CharLmTrainTask::window_at(std::size_t start, std::vector<int>& ids, int& target) const {
    ids.assign(data_.tokens.begin() + start, data_.tokens.begin() + start + data_.seq_len);
    target = data_.tokens[start + data_.seq_len];
}

double CharLmTrainTask::batch_step(const ToyModel& model, std::uint64_t seed, long step,
                                   int batch_size, GradMap* grads, Rng* drop_rng) const {
    Rng rng(mix64(mix64(seed, kBatchStream), static_cast<std::uint64_t>(step)));
    const int windows = static_cast<int>(data_.train_window_count());
    double loss = 0.0;
    std::vector<int> ids;
    for (int j = 0; j < batch_size; ++j) {
        const std::size_t start = static_cast<std::size_t>(rng.next_index(windows));
        int target = 0;
        window_at(start, ids, target);
        ModelCache cache;
        Matrix logits = lm_forward(model, ids, cache, grads != nullptr, drop_rng);
        Matrix g;
        loss += loss_xent(logits, target, g);
        if (grads != nullptr) lm_backward(model, cache, g, *grads);
    }
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    if (grads != nullptr) {
        for (auto& [name, g] : *grads) scale_in_place(g, inv_b);
    }
    return loss * inv_b;
}

double CharLmTrainTask::eval_loss(const ToyModel& model) const {
    const std::size_t windows = data_.eval_window_count();
    if (windows == 0) return std::numeric_limits<double>::quiet_NaN();
    double loss = 0.0;
    std::vector<int> ids;
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t start = data_.train_tokens + w;
        int target = 0;
        window_at(start, ids, target);
        ModelCache cache;
        Matrix logits = lm_forward(model, ids, cache);
        Matrix g;
        loss += loss_xent(logits, target, g);
    }
    return loss / static_cast<double>(windows);
}

} // namespace deltalora
