#include "cctl/data.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cctl/json_io.hpp"

namespace cctl {

void SynthConfig::validate() const {
    auto frac = [](double x, const char* name) {
        if (x < 0.0 || x > 1.0) {
            throw std::runtime_error(std::string("synth config: ") + name +
                                     " must lie in [0,1], got " + std::to_string(x));
        }
    };
    frac(user_overlap, "user_overlap");
    frac(item_overlap, "item_overlap");
    frac(domain_shift, "domain_shift");
    frac(source_label_noise, "source_label_noise");
    if (n_users_source == 0 || n_items_source == 0 || n_users_target == 0 ||
        n_items_target == 0 || latent_dim == 0 || embed_dim == 0 || max_seq_len == 0 ||
        context_vocab == 0) {
        throw std::runtime_error("synth config: counts must be positive");
    }
    size_t shared_users = static_cast<size_t>(
        std::llround(user_overlap * static_cast<double>(std::min(n_users_source, n_users_target))));
    size_t shared_items = static_cast<size_t>(
        std::llround(item_overlap * static_cast<double>(std::min(n_items_source, n_items_target))));
    if (shared_users > std::min(n_users_source, n_users_target) ||
        shared_items > std::min(n_items_source, n_items_target)) {
        throw std::runtime_error("synth config: overlap count exceeds the smaller population");
    }
}

namespace {

FeatureSchema synth_schema(const SynthConfig& cfg, Domain d) {
    FeatureSchema schema;
    schema.domain = d;
    size_t nu = d == Domain::source ? cfg.n_users_source : cfg.n_users_target;
    size_t ni = d == Domain::source ? cfg.n_items_source : cfg.n_items_target;
    schema.fields = {{"user_id", nu + 1, TokenGroup::user},
                     {"item_id", ni + 1, TokenGroup::item},
                     {"ctx", cfg.context_vocab + 1, TokenGroup::context}};
    schema.sequence = SequenceSpec{"seq", "item_id", cfg.max_seq_len};
    schema.embed_dim = cfg.embed_dim;
    return schema;
}

std::vector<double> draw_latent(Rng& rng, size_t dim) {
    std::vector<double> v(dim);
    for (double& x : v) {
        x = rng.gaussian();
    }
    return v;
}

void normalize_rows(DenseMatrix& m) {
    for (size_t r = 0; r < m.rows; ++r) {
        std::span<double> row = m.row(r);
        double norm = 0.0;
        for (double x : row) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& x : row) x /= norm;
        }
    }
}

DenseMatrix random_unit_rows(Rng rng, size_t dim) {
    DenseMatrix m(dim, dim);
    for (double& x : m.values) {
        x = rng.gaussian();
    }
    normalize_rows(m);
    return m;
}

} // namespace

double SynthGroundTruth::click_prob(Domain d, int64_t user_id, int64_t item_id, int64_t ctx_id,
                                    double logit_scale) const {
    const auto& users = d == Domain::source ? user_latents_source : user_latents_target;
    const auto& items = d == Domain::source ? item_latents_source : item_latents_target;
    const DenseMatrix& w = d == Domain::source ? w_source : w_target;
    const auto& bias = d == Domain::source ? ctx_bias_source : ctx_bias_target;
    const std::vector<double>& u = users.at(static_cast<size_t>(user_id));
    const std::vector<double>& v = items.at(static_cast<size_t>(item_id));
    size_t dim = u.size();
    double s = 0.0;
    for (size_t r = 0; r < dim; ++r) {
        double wi = 0.0;
        for (size_t c = 0; c < dim; ++c) {
            wi += w.at(r, c) * v[c];
        }
        s += u[r] * wi;
    }
    double logit = logit_scale * s / std::sqrt(static_cast<double>(dim)) +
                   bias.at(static_cast<size_t>(ctx_id));
    return 1.0 / (1.0 + std::exp(-logit));
}

SynthGroundTruth synth_ground_truth(const SynthConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    SynthGroundTruth gt;

    gt.w_target = random_unit_rows(root.split("concept.target"), cfg.latent_dim);
    if (cfg.domain_shift == 0.0) {
        gt.w_source = gt.w_target;
    } else {
        DenseMatrix w_rand = random_unit_rows(root.split("concept.rand"), cfg.latent_dim);
        gt.w_source = DenseMatrix(cfg.latent_dim, cfg.latent_dim);
        for (size_t i = 0; i < gt.w_source.values.size(); ++i) {
            gt.w_source.values[i] = (1.0 - cfg.domain_shift) * gt.w_target.values[i] +
                                    cfg.domain_shift * w_rand.values[i];
        }
        normalize_rows(gt.w_source);
    }

    size_t shared_users = static_cast<size_t>(
        std::llround(cfg.user_overlap * static_cast<double>(std::min(cfg.n_users_source, cfg.n_users_target))));
    size_t shared_items = static_cast<size_t>(
        std::llround(cfg.item_overlap * static_cast<double>(std::min(cfg.n_items_source, cfg.n_items_target))));

    // latents attach to raw entities; shared entities reuse the source draw
    Rng ur = root.split("latents.user.source");
    gt.user_latents_source.resize(cfg.n_users_source + 1);
    for (size_t i = 1; i <= cfg.n_users_source; ++i) {
        gt.user_latents_source[i] = draw_latent(ur, cfg.latent_dim);
    }
    Rng ut = root.split("latents.user.target");
    gt.user_latents_target.resize(cfg.n_users_target + 1);
    for (size_t i = 1; i <= cfg.n_users_target; ++i) {
        gt.user_latents_target[i] =
            i <= shared_users ? gt.user_latents_source[i] : draw_latent(ut, cfg.latent_dim);
    }
    Rng ir = root.split("latents.item.source");
    gt.item_latents_source.resize(cfg.n_items_source + 1);
    for (size_t i = 1; i <= cfg.n_items_source; ++i) {
        gt.item_latents_source[i] = draw_latent(ir, cfg.latent_dim);
    }
    Rng it = root.split("latents.item.target");
    gt.item_latents_target.resize(cfg.n_items_target + 1);
    for (size_t i = 1; i <= cfg.n_items_target; ++i) {
        gt.item_latents_target[i] =
            i <= shared_items ? gt.item_latents_source[i] : draw_latent(it, cfg.latent_dim);
    }

    Rng cb = root.split("ctx.bias");
    gt.ctx_bias_target.assign(cfg.context_vocab + 1, 0.0);
    std::vector<double> ctx_rand(cfg.context_vocab + 1, 0.0);
    for (size_t c = 1; c <= cfg.context_vocab; ++c) {
        gt.ctx_bias_target[c] = 0.3 * cb.gaussian();
        ctx_rand[c] = 0.3 * cb.gaussian();
    }
    gt.ctx_bias_source = gt.ctx_bias_target;
    if (cfg.domain_shift != 0.0) {
        for (size_t c = 0; c <= cfg.context_vocab; ++c) {
            gt.ctx_bias_source[c] = (1.0 - cfg.domain_shift) * gt.ctx_bias_target[c] +
                                    cfg.domain_shift * ctx_rand[c];
        }
    }
    return gt;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    SynthGroundTruth gt = synth_ground_truth(cfg);
    Rng root(cfg.seed);

    Dataset ds;
    ds.seed = cfg.seed;
    ds.source_schema = synth_schema(cfg, Domain::source);
    ds.target_schema = synth_schema(cfg, Domain::target);

    size_t shared_users = static_cast<size_t>(
        std::llround(cfg.user_overlap * static_cast<double>(std::min(cfg.n_users_source, cfg.n_users_target))));
    size_t shared_items = static_cast<size_t>(
        std::llround(cfg.item_overlap * static_cast<double>(std::min(cfg.n_items_source, cfg.n_items_target))));
    for (size_t i = 1; i <= shared_users; ++i) {
        ds.overlap.users_src2tgt[static_cast<int64_t>(i)] = static_cast<int64_t>(i);
    }
    for (size_t i = 1; i <= shared_items; ++i) {
        ds.overlap.items_src2tgt[static_cast<int64_t>(i)] = static_cast<int64_t>(i);
    }

    auto gen_domain = [&](Domain d, size_t n_users, size_t n_items, size_t n_samples,
                          std::vector<Sample>& out) {
        Rng rng = root.split(std::string("samples.") + domain_name(d));
        std::vector<std::vector<int64_t>> history(n_users + 1);
        out.reserve(n_samples);
        for (size_t i = 0; i < n_samples; ++i) {
            Sample s;
            s.domain = d;
            int64_t uid = 1 + static_cast<int64_t>(rng.below(n_users));
            int64_t iid = 1 + static_cast<int64_t>(rng.below(n_items));
            int64_t ctx = 1 + static_cast<int64_t>(rng.below(cfg.context_vocab));
            s.feature_ids = {uid, iid, ctx};
            const std::vector<int64_t>& h = history[static_cast<size_t>(uid)];
            size_t take = std::min(h.size(), cfg.max_seq_len);
            s.sequence_ids.assign(h.end() - static_cast<long>(take), h.end());
            double p = gt.click_prob(d, uid, iid, ctx, cfg.logit_scale);
            bool clicked = rng.uniform01() < p;
            s.label = clicked ? 1 : 0;
            if (clicked) {
                history[static_cast<size_t>(uid)].push_back(iid);
            }
            out.push_back(std::move(s));
        }
    };
    gen_domain(Domain::source, cfg.n_users_source, cfg.n_items_source, cfg.n_samples_source,
               ds.source_samples);
    gen_domain(Domain::target, cfg.n_users_target, cfg.n_items_target, cfg.n_samples_target,
               ds.target_samples);

    if (cfg.source_label_noise > 0.0) {
        Rng noise = root.split("noise");
        for (Sample& s : ds.source_samples) {
            if (noise.uniform01() < cfg.source_label_noise) {
                s.label = 1 - s.label;
            }
        }
    }

    auto split_domain = [&](Domain d, size_t n, std::vector<size_t>& train,
                            std::vector<size_t>& test) {
        Rng rng = root.split(std::string("split.") + domain_name(d));
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = rng.below(i);
            std::swap(idx[i - 1], idx[j]);
        }
        size_t n_train = (n * 9) / 10;
        train.assign(idx.begin(), idx.begin() + n_train);
        test.assign(idx.begin() + n_train, idx.end());
    };
    split_domain(Domain::source, ds.source_samples.size(), ds.source_train, ds.source_test);
    split_domain(Domain::target, ds.target_samples.size(), ds.target_train, ds.target_test);
    return ds;
}

// ---------------- CSV ----------------

namespace {

// a value's id is its trailing digit run ("u7" -> 7); unknown or out-of-vocab
// values map to the reserved OOV id 0
int64_t parse_field_value(const std::string& tok, size_t vocab_size) {
    size_t end = tok.size();
    size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(tok[begin - 1]))) {
        --begin;
    }
    if (begin == end) {
        return 0;
    }
    errno = 0;
    int64_t id = std::strtoll(tok.c_str() + begin, nullptr, 10);
    if (errno != 0 || id < 0 || static_cast<size_t>(id) >= vocab_size) {
        return 0;
    }
    return id;
}

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string csv_header(const FeatureSchema& schema) {
    std::string h;
    for (const FieldSpec& f : schema.fields) {
        h += f.name;
        h += ',';
    }
    h += "sequence,label";
    return h;
}

} // namespace

std::vector<Sample> load_csv(const std::string& path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_csv: cannot open '" + path + "'");
    }
    std::vector<Sample> samples;
    std::string line;
    size_t line_no = 0;
    size_t expect_cols = schema.fields.size() + 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1) {
            continue; // header
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cols = split_line(line, ',');
        if (cols.size() != expect_cols) {
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(expect_cols) + " columns, got " +
                                     std::to_string(cols.size()));
        }
        Sample s;
        s.domain = schema.domain;
        for (size_t i = 0; i < schema.fields.size(); ++i) {
            s.feature_ids.push_back(parse_field_value(cols[i], schema.fields[i].vocab_size));
        }
        const std::string& seq = cols[schema.fields.size()];
        if (!seq.empty() && schema.sequence) {
            size_t vocab = schema.field(schema.sequence->item_field).vocab_size;
            for (const std::string& tok : split_line(seq, '|')) {
                s.sequence_ids.push_back(parse_field_value(tok, vocab));
            }
            if (s.sequence_ids.size() > schema.sequence->max_len) {
                // keep the most recent ids
                s.sequence_ids.erase(s.sequence_ids.begin(),
                                     s.sequence_ids.end() - static_cast<long>(schema.sequence->max_len));
            }
        }
        const std::string& label = cols.back();
        if (label == "0") {
            s.label = 0;
        } else if (label == "1") {
            s.label = 1;
        } else {
            throw std::runtime_error("load_csv: line " + std::to_string(line_no) +
                                     ": label must be 0 or 1, got '" + label + "'");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_csv(const std::string& path, const FeatureSchema& schema,
               const std::vector<Sample>& samples) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_csv: cannot open '" + path + "'");
    }
    out << csv_header(schema) << "\n";
    for (const Sample& s : samples) {
        for (int64_t id : s.feature_ids) {
            out << id << ',';
        }
        for (size_t i = 0; i < s.sequence_ids.size(); ++i) {
            if (i) out << '|';
            out << s.sequence_ids[i];
        }
        out << ',' << s.label << "\n";
    }
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_csv(dir + "/source.csv", ds.source_schema, ds.source_samples);
    write_csv(dir + "/target.csv", ds.target_schema, ds.target_samples);
    json meta;
    meta["seed"] = ds.seed;
    meta["source_schema"] = schema_to_json(ds.source_schema);
    meta["target_schema"] = schema_to_json(ds.target_schema);
    json users = json::array(), items = json::array();
    for (const auto& [s, t] : ds.overlap.users_src2tgt) {
        users.push_back({s, t});
    }
    for (const auto& [s, t] : ds.overlap.items_src2tgt) {
        items.push_back({s, t});
    }
    meta["overlap"] = {{"users", users}, {"items", items}};
    meta["split"] = {{"source_train", ds.source_train},
                     {"source_test", ds.source_test},
                     {"target_train", ds.target_train},
                     {"target_test", ds.target_test}};
    write_json_file(dir + "/meta.json", meta);
}

Dataset load_dataset(const std::string& dir) {
    json meta = read_json_file(dir + "/meta.json");
    Dataset ds;
    ds.seed = meta.at("seed").get<uint64_t>();
    ds.source_schema = schema_from_json(meta.at("source_schema"));
    ds.target_schema = schema_from_json(meta.at("target_schema"));
    ds.source_samples = load_csv(dir + "/source.csv", ds.source_schema);
    ds.target_samples = load_csv(dir + "/target.csv", ds.target_schema);
    for (const json& p : meta.at("overlap").at("users")) {
        ds.overlap.users_src2tgt[p.at(0).get<int64_t>()] = p.at(1).get<int64_t>();
    }
    for (const json& p : meta.at("overlap").at("items")) {
        ds.overlap.items_src2tgt[p.at(0).get<int64_t>()] = p.at(1).get<int64_t>();
    }
    ds.source_train = meta.at("split").at("source_train").get<std::vector<size_t>>();
    ds.source_test = meta.at("split").at("source_test").get<std::vector<size_t>>();
    ds.target_train = meta.at("split").at("target_train").get<std::vector<size_t>>();
    ds.target_test = meta.at("split").at("target_test").get<std::vector<size_t>>();
    return ds;
}

// ---------------- batching ----------------

BatchStream::BatchStream(const std::vector<Sample>* samples, std::vector<size_t> indices,
                         size_t batch_size, Rng rng)
    : samples_(samples), indices_(std::move(indices)), batch_size_(batch_size), rng_(rng) {
    if (batch_size_ == 0) {
        throw std::runtime_error("make_batches: batch_size must be positive");
    }
    reshuffle();
}

void BatchStream::reshuffle() {
    for (size_t i = indices_.size(); i > 1; --i) {
        size_t j = rng_.below(i);
        std::swap(indices_[i - 1], indices_[j]);
    }
    pos_ = 0;
}

Batch BatchStream::next() {
    Batch batch;
    if (indices_.empty()) {
        return batch;
    }
    if (pos_ >= indices_.size()) {
        reshuffle();
    }
    size_t take = std::min(batch_size_, indices_.size() - pos_);
    batch.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        batch.push_back((*samples_)[indices_[pos_ + i]]);
    }
    pos_ += take;
    return batch;
}

size_t BatchStream::batches_per_epoch() const {
    return (indices_.size() + batch_size_ - 1) / batch_size_;
}

BatchStream make_batches(const Dataset& ds, Domain domain, Split split, size_t batch_size,
                         Rng rng) {
    const std::vector<size_t>& idx =
        domain == Domain::source ? (split == Split::train ? ds.source_train : ds.source_test)
                                 : (split == Split::train ? ds.target_train : ds.target_test);
    return BatchStream(&ds.samples(domain), idx, batch_size, rng);
}

EntityLinkage make_linkage(const Dataset& ds) {
    EntityLinkage link;
    for (const auto& [s, t] : ds.overlap.users_src2tgt) {
        link.user_src2tgt[s] = t;
        link.user_tgt2src[t] = s;
    }
    for (const auto& [s, t] : ds.overlap.items_src2tgt) {
        link.item_src2tgt[s] = t;
        link.item_tgt2src[t] = s;
    }
    return link;
}

} // namespace cctl
