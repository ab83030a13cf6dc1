#include "leadnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "leadnet/errors.hpp"

namespace leadnet {

namespace {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), static_cast<std::int64_t>(1),
                           std::multiplies<>());
}

void require(bool cond, const char* msg) {
    if (!cond) {
        throw ShapeError(msg);
    }
}

}  // namespace

Tensor::Tensor(std::vector<double> d, std::vector<std::int64_t> s, bool req_grad)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor data size does not match shape");
    }
    if (requires_grad) {
        grad.assign(data.size(), 0.0);
    }
}

double Tensor::item() const {
    if (data.size() != 1) {
        throw ShapeError("item() requires a single-element tensor");
    }
    return data[0];
}

void Tensor::zero_grad() {
    if (requires_grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
    }
}

void Tensor::accum_grad(const std::vector<double>& g) {
    if (!requires_grad) {
        return;
    }
    if (g.size() != data.size()) {
        throw ShapeError("gradient size mismatch");
    }
    if (grad.size() != data.size()) {
        grad.assign(data.size(), 0.0);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        grad[i] += g[i];
    }
}

void Tensor::backward(const std::vector<double>* seed) {
    std::vector<double> g;
    if (seed) {
        if (seed->size() != data.size()) {
            throw ShapeError("backward seed size mismatch");
        }
        g = *seed;
    } else {
        if (data.size() != 1) {
            throw ShapeError("backward without seed requires a scalar output");
        }
        g = {1.0};
    }

    // Reverse topological order over the recorded tape.
    std::vector<Tensor*> topo;
    std::unordered_set<Tensor*> visited;
    std::vector<std::pair<Tensor*, std::size_t>> stack;
    stack.emplace_back(this, 0);
    visited.insert(this);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Tensor* child = node->inputs[next++].get();
            if (visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    if (!requires_grad) {
        grad.assign(data.size(), 0.0);
        requires_grad = true;
    }
    accum_grad(g);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        if ((*it)->backward_fn) {
            (*it)->backward_fn();
        }
    }
}

TensorPtr tensor(std::vector<double> data, std::vector<std::int64_t> shape, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(data), std::move(shape), requires_grad);
}

TensorPtr scalar(double v, bool requires_grad) {
    return tensor({v}, {1}, requires_grad);
}

TensorPtr zeros(const std::vector<std::int64_t>& shape, bool requires_grad) {
    return tensor(std::vector<double>(static_cast<std::size_t>(shape_numel(shape)), 0.0), shape,
                  requires_grad);
}

TensorPtr full(const std::vector<std::int64_t>& shape, double v, bool requires_grad) {
    return tensor(std::vector<double>(static_cast<std::size_t>(shape_numel(shape)), v), shape,
                  requires_grad);
}

TensorPtr randn(const std::vector<std::int64_t>& shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) {
        v = rng.normal(0.0, stddev);
    }
    return tensor(std::move(d), shape, requires_grad);
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "add: shape mismatch");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] + b->data[i];
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad || b->requires_grad);
    out->inputs = {a, b};
    Tensor* o = out.get();
    out->backward_fn = [a, b, o]() {
        if (a->requires_grad) {
            a->accum_grad(o->grad);
        }
        if (b->requires_grad) {
            b->accum_grad(o->grad);
        }
    };
    return out;
}

TensorPtr add_row(const TensorPtr& m, const TensorPtr& row) {
    require(m->shape.size() == 2, "add_row: matrix must be 2-d");
    const std::int64_t t = m->rows();
    const std::int64_t ddim = m->cols();
    require(row->numel() == ddim, "add_row: row length mismatch");
    std::vector<double> d(m->data.size());
    for (std::int64_t r = 0; r < t; ++r) {
        for (std::int64_t c = 0; c < ddim; ++c) {
            d[static_cast<std::size_t>(r * ddim + c)] =
                m->data[static_cast<std::size_t>(r * ddim + c)] + row->data[static_cast<std::size_t>(c)];
        }
    }
    auto out = tensor(std::move(d), m->shape, m->requires_grad || row->requires_grad);
    out->inputs = {m, row};
    Tensor* o = out.get();
    out->backward_fn = [m, row, o, t, ddim]() {
        if (m->requires_grad) {
            m->accum_grad(o->grad);
        }
        if (row->requires_grad) {
            std::vector<double> gr(static_cast<std::size_t>(ddim), 0.0);
            for (std::int64_t r = 0; r < t; ++r) {
                for (std::int64_t c = 0; c < ddim; ++c) {
                    gr[static_cast<std::size_t>(c)] += o->grad[static_cast<std::size_t>(r * ddim + c)];
                }
            }
            row->accum_grad(gr);
        }
    };
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "sub: shape mismatch");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] - b->data[i];
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad || b->requires_grad);
    out->inputs = {a, b};
    Tensor* o = out.get();
    out->backward_fn = [a, b, o]() {
        if (a->requires_grad) {
            a->accum_grad(o->grad);
        }
        if (b->requires_grad) {
            std::vector<double> gb(o->grad.size());
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] = -o->grad[i];
            }
            b->accum_grad(gb);
        }
    };
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape == b->shape, "mul: shape mismatch");
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] * b->data[i];
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad || b->requires_grad);
    out->inputs = {a, b};
    Tensor* o = out.get();
    out->backward_fn = [a, b, o]() {
        if (a->requires_grad) {
            std::vector<double> ga(o->grad.size());
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] = b->data[i] * o->grad[i];
            }
            a->accum_grad(ga);
        }
        if (b->requires_grad) {
            std::vector<double> gb(o->grad.size());
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] = a->data[i] * o->grad[i];
            }
            b->accum_grad(gb);
        }
    };
    return out;
}

TensorPtr affine(const TensorPtr& a, double mul, double shift) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] * mul + shift;
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o, mul]() {
        if (!a->requires_grad) {
            return;
        }
        std::vector<double> ga(o->grad.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] = mul * o->grad[i];
        }
        a->accum_grad(ga);
    };
    return out;
}

TensorPtr scale(const TensorPtr& a, double c) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = a->data[i] * c;
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o, c]() {
        if (!a->requires_grad) {
            return;
        }
        std::vector<double> ga(o->grad.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] = c * o->grad[i];
        }
        a->accum_grad(ga);
    };
    return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2, "matmul: expects 2-d tensors");
    const std::int64_t m = a->rows();
    const std::int64_t k = a->cols();
    const std::int64_t n = b->cols();
    if (b->rows() != k) {
        throw ShapeError("matmul: inner dimensions mismatch");
    }
    std::vector<double> d(static_cast<std::size_t>(m * n), 0.0);
    {
        const double* ap = a->data.data();
        const double* bp = b->data.data();
        double* op = d.data();
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t p = 0; p < k; ++p) {
                const double av = ap[i * k + p];
                const double* brow = bp + p * n;
                double* orow = op + i * n;
                for (std::int64_t j = 0; j < n; ++j) {
                    orow[j] += av * brow[j];
                }
            }
        }
    }
    auto out = tensor(std::move(d), {m, n}, a->requires_grad || b->requires_grad);
    out->inputs = {a, b};
    Tensor* o = out.get();
    out->backward_fn = [a, b, o, m, k, n]() {
        // dA = dC * B^T, dB = A^T * dC
        if (a->requires_grad) {
            std::vector<double> ga(static_cast<std::size_t>(m * k), 0.0);
            const double* gp = o->grad.data();
            const double* bp = b->data.data();
            for (std::int64_t i = 0; i < m; ++i) {
                for (std::int64_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = gp + i * n;
                    const double* brow = bp + p * n;
                    for (std::int64_t j = 0; j < n; ++j) {
                        s += grow[j] * brow[j];
                    }
                    ga[static_cast<std::size_t>(i * k + p)] = s;
                }
            }
            a->accum_grad(ga);
        }
        if (b->requires_grad) {
            std::vector<double> gb(static_cast<std::size_t>(k * n), 0.0);
            const double* gp = o->grad.data();
            const double* ap = a->data.data();
            for (std::int64_t i = 0; i < m; ++i) {
                const double* grow = gp + i * n;
                for (std::int64_t p = 0; p < k; ++p) {
                    const double av = ap[i * k + p];
                    double* brow = gb.data() + p * n;
                    for (std::int64_t j = 0; j < n; ++j) {
                        brow[j] += av * grow[j];
                    }
                }
            }
            b->accum_grad(gb);
        }
    };
    return out;
}

TensorPtr transpose2d(const TensorPtr& a) {
    require(a->shape.size() == 2, "transpose2d: expects 2-d tensor");
    const std::int64_t m = a->rows();
    const std::int64_t n = a->cols();
    std::vector<double> d(a->data.size());
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            d[static_cast<std::size_t>(j * m + i)] = a->data[static_cast<std::size_t>(i * n + j)];
        }
    }
    auto out = tensor(std::move(d), {n, m}, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o, m, n]() {
        if (!a->requires_grad) {
            return;
        }
        std::vector<double> ga(a->data.size());
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                ga[static_cast<std::size_t>(i * n + j)] = o->grad[static_cast<std::size_t>(j * m + i)];
            }
        }
        a->accum_grad(ga);
    };
    return out;
}

TensorPtr reshape(const TensorPtr& a, std::vector<std::int64_t> new_shape) {
    if (shape_numel(new_shape) != a->numel()) {
        throw ShapeError("reshape: element count mismatch");
    }
    auto out = tensor(a->data, std::move(new_shape), a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o]() {
        if (a->requires_grad) {
            a->accum_grad(o->grad);
        }
    };
    return out;
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    require(!parts.empty(), "concat_rows: empty input");
    const std::int64_t cols = parts[0]->cols();
    std::int64_t total_rows = 0;
    bool req = false;
    for (const auto& p : parts) {
        require(p->shape.size() == 2 && p->cols() == cols, "concat_rows: column mismatch");
        total_rows += p->rows();
        req = req || p->requires_grad;
    }
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(total_rows * cols));
    for (const auto& p : parts) {
        d.insert(d.end(), p->data.begin(), p->data.end());
    }
    auto out = tensor(std::move(d), {total_rows, cols}, req);
    out->inputs = parts;
    Tensor* o = out.get();
    out->backward_fn = [parts, o]() {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) {
                std::vector<double> gp(o->grad.begin() + static_cast<std::ptrdiff_t>(offset),
                                       o->grad.begin() + static_cast<std::ptrdiff_t>(offset + p->data.size()));
                p->accum_grad(gp);
            }
            offset += p->data.size();
        }
    };
    return out;
}

TensorPtr mean_rows(const TensorPtr& m) {
    require(m->shape.size() == 2, "mean_rows: expects 2-d tensor");
    const std::int64_t t = m->rows();
    const std::int64_t dcols = m->cols();
    require(t >= 1, "mean_rows: empty matrix");
    std::vector<double> d(static_cast<std::size_t>(dcols), 0.0);
    for (std::int64_t r = 0; r < t; ++r) {
        for (std::int64_t c = 0; c < dcols; ++c) {
            d[static_cast<std::size_t>(c)] += m->data[static_cast<std::size_t>(r * dcols + c)];
        }
    }
    const double inv = 1.0 / static_cast<double>(t);
    for (auto& v : d) {
        v *= inv;
    }
    auto out = tensor(std::move(d), {1, dcols}, m->requires_grad);
    out->inputs = {m};
    Tensor* o = out.get();
    out->backward_fn = [m, o, t, dcols, inv]() {
        if (!m->requires_grad) {
            return;
        }
        std::vector<double> gm(m->data.size());
        for (std::int64_t r = 0; r < t; ++r) {
            for (std::int64_t c = 0; c < dcols; ++c) {
                gm[static_cast<std::size_t>(r * dcols + c)] = inv * o->grad[static_cast<std::size_t>(c)];
            }
        }
        m->accum_grad(gm);
    };
    return out;
}

TensorPtr sum_all(const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) {
        s += v;
    }
    auto out = tensor({s}, {1}, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o]() {
        if (a->requires_grad) {
            a->accum_grad(std::vector<double>(a->data.size(), o->grad[0]));
        }
    };
    return out;
}

TensorPtr tanh_op(const TensorPtr& a) {
    std::vector<double> d(a->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = std::tanh(a->data[i]);
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o]() {
        if (!a->requires_grad) {
            return;
        }
        std::vector<double> ga(o->grad.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] = (1.0 - o->data[i] * o->data[i]) * o->grad[i];
        }
        a->accum_grad(ga);
    };
    return out;
}

TensorPtr softmax(const TensorPtr& a) {
    require(!a->shape.empty(), "softmax: requires at least 1-d input");
    const std::int64_t n = a->shape.back();
    const std::int64_t rows = a->numel() / n;
    std::vector<double> d(a->data.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* x = a->data.data() + r * n;
        double* y = d.data() + r * n;
        double mx = x[0];
        for (std::int64_t j = 1; j < n; ++j) {
            mx = std::max(mx, x[j]);
        }
        double sum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        const double inv = 1.0 / sum;
        for (std::int64_t j = 0; j < n; ++j) {
            y[j] *= inv;
        }
    }
    auto out = tensor(std::move(d), a->shape, a->requires_grad);
    out->inputs = {a};
    Tensor* o = out.get();
    out->backward_fn = [a, o, rows, n]() {
        if (!a->requires_grad) {
            return;
        }
        std::vector<double> ga(a->data.size());
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = o->data.data() + r * n;
            const double* gy = o->grad.data() + r * n;
            double dot = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
                dot += y[j] * gy[j];
            }
            double* gx = ga.data() + r * n;
            for (std::int64_t j = 0; j < n; ++j) {
                gx[j] = y[j] * (gy[j] - dot);
            }
        }
        a->accum_grad(ga);
    };
    return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias, double eps) {
    require(x->shape.size() == 2, "layer_norm: expects 2-d input");
    const std::int64_t t = x->rows();
    const std::int64_t dcols = x->cols();
    require(gain->numel() == dcols && bias->numel() == dcols, "layer_norm: gain/bias length mismatch");
    if (!(eps > 0.0)) {
        throw ConfigError("layer_norm: eps must be > 0");
    }

    std::vector<double> xhat(x->data.size());
    std::vector<double> invstd(static_cast<std::size_t>(t));
    std::vector<double> d(x->data.size());
    for (std::int64_t r = 0; r < t; ++r) {
        const double* xr = x->data.data() + r * dcols;
        double mean = 0.0;
        for (std::int64_t c = 0; c < dcols; ++c) {
            mean += xr[c];
        }
        mean /= static_cast<double>(dcols);
        double var = 0.0;
        for (std::int64_t c = 0; c < dcols; ++c) {
            const double dv = xr[c] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(dcols);
        const double is = 1.0 / std::sqrt(var + eps);
        invstd[static_cast<std::size_t>(r)] = is;
        for (std::int64_t c = 0; c < dcols; ++c) {
            const double xn = (xr[c] - mean) * is;
            xhat[static_cast<std::size_t>(r * dcols + c)] = xn;
            d[static_cast<std::size_t>(r * dcols + c)] =
                xn * gain->data[static_cast<std::size_t>(c)] + bias->data[static_cast<std::size_t>(c)];
        }
    }

    auto out = tensor(std::move(d), x->shape,
                      x->requires_grad || gain->requires_grad || bias->requires_grad);
    out->inputs = {x, gain, bias};
    Tensor* o = out.get();
    out->backward_fn = [x, gain, bias, o, t, dcols, xhat = std::move(xhat),
                        invstd = std::move(invstd)]() {
        if (bias->requires_grad) {
            std::vector<double> gb(static_cast<std::size_t>(dcols), 0.0);
            for (std::int64_t r = 0; r < t; ++r) {
                for (std::int64_t c = 0; c < dcols; ++c) {
                    gb[static_cast<std::size_t>(c)] += o->grad[static_cast<std::size_t>(r * dcols + c)];
                }
            }
            bias->accum_grad(gb);
        }
        if (gain->requires_grad) {
            std::vector<double> gg(static_cast<std::size_t>(dcols), 0.0);
            for (std::int64_t r = 0; r < t; ++r) {
                for (std::int64_t c = 0; c < dcols; ++c) {
                    gg[static_cast<std::size_t>(c)] +=
                        o->grad[static_cast<std::size_t>(r * dcols + c)] *
                        xhat[static_cast<std::size_t>(r * dcols + c)];
                }
            }
            gain->accum_grad(gg);
        }
        if (x->requires_grad) {
            // dx = invstd/D * (D*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
            std::vector<double> gx(x->data.size());
            const double dn = static_cast<double>(dcols);
            for (std::int64_t r = 0; r < t; ++r) {
                double s1 = 0.0;
                double s2 = 0.0;
                for (std::int64_t c = 0; c < dcols; ++c) {
                    const double dxh = o->grad[static_cast<std::size_t>(r * dcols + c)] *
                                       gain->data[static_cast<std::size_t>(c)];
                    s1 += dxh;
                    s2 += dxh * xhat[static_cast<std::size_t>(r * dcols + c)];
                }
                const double is = invstd[static_cast<std::size_t>(r)];
                for (std::int64_t c = 0; c < dcols; ++c) {
                    const std::size_t idx = static_cast<std::size_t>(r * dcols + c);
                    const double dxh = o->grad[idx] * gain->data[static_cast<std::size_t>(c)];
                    gx[idx] = is / dn * (dn * dxh - s1 - xhat[idx] * s2);
                }
            }
            x->accum_grad(gx);
        }
    };
    return out;
}

TensorPtr dropout(const TensorPtr& x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout: p must be in [0, 1)");
    }
    if (!training || p == 0.0) {
        auto out = tensor(x->data, x->shape, x->requires_grad);
        out->inputs = {x};
        Tensor* o = out.get();
        out->backward_fn = [x, o]() {
            if (x->requires_grad) {
                x->accum_grad(o->grad);
            }
        };
        return out;
    }
    const double keep = 1.0 - p;
    const double inv_keep = 1.0 / keep;
    std::vector<double> mask(x->data.size());
    std::vector<double> d(x->data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double m = (rng.uniform() < keep) ? inv_keep : 0.0;
        mask[i] = m;
        d[i] = x->data[i] * m;
    }
    auto out = tensor(std::move(d), x->shape, x->requires_grad);
    out->inputs = {x};
    Tensor* o = out.get();
    out->backward_fn = [x, o, mask = std::move(mask)]() {
        if (!x->requires_grad) {
            return;
        }
        std::vector<double> gx(o->grad.size());
        for (std::size_t i = 0; i < gx.size(); ++i) {
            gx[i] = o->grad[i] * mask[i];
        }
        x->accum_grad(gx);
    };
    return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets) {
    require(logits->shape.size() == 2, "cross_entropy: logits must be T x C");
    const std::int64_t t = logits->rows();
    const std::int64_t c = logits->cols();
    if (static_cast<std::int64_t>(targets.size()) != t) {
        throw ShapeError("cross_entropy: target length mismatch");
    }
    for (int tv : targets) {
        if (tv < 0 || tv >= c) {
            throw DataError("cross_entropy: target class out of range");
        }
    }

    // log-softmax per row, stored as probabilities for the backward pass
    std::vector<double> probs(logits->data.size());
    double loss = 0.0;
    for (std::int64_t r = 0; r < t; ++r) {
        const double* x = logits->data.data() + r * c;
        double mx = x[0];
        for (std::int64_t j = 1; j < c; ++j) {
            mx = std::max(mx, x[j]);
        }
        double sum = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
            sum += std::exp(x[j] - mx);
        }
        const double log_z = mx + std::log(sum);
        const double inv_sum = 1.0 / sum;
        for (std::int64_t j = 0; j < c; ++j) {
            probs[static_cast<std::size_t>(r * c + j)] = std::exp(x[j] - mx) * inv_sum;
        }
        loss -= x[targets[static_cast<std::size_t>(r)]] - log_z;
    }
    loss /= static_cast<double>(t);

    auto out = tensor({loss}, {1}, logits->requires_grad);
    out->inputs = {logits};
    Tensor* o = out.get();
    out->backward_fn = [logits, o, t, c, targets, probs = std::move(probs)]() {
        if (!logits->requires_grad) {
            return;
        }
        const double g = o->grad[0] / static_cast<double>(t);
        std::vector<double> gx(logits->data.size());
        for (std::int64_t r = 0; r < t; ++r) {
            for (std::int64_t j = 0; j < c; ++j) {
                const std::size_t idx = static_cast<std::size_t>(r * c + j);
                gx[idx] = g * (probs[idx] - (targets[static_cast<std::size_t>(r)] == j ? 1.0 : 0.0));
            }
        }
        logits->accum_grad(gx);
    };
    return out;
}

TensorPtr embedding_row(const TensorPtr& table, int index) {
    require(table->shape.size() == 2, "embedding_row: table must be V x D");
    const std::int64_t v = table->rows();
    const std::int64_t dcols = table->cols();
    if (index < 0 || index >= v) {
        throw DataError("embedding_row: index out of range");
    }
    std::vector<double> d(table->data.begin() + index * dcols,
                          table->data.begin() + (index + 1) * dcols);
    auto out = tensor(std::move(d), {1, dcols}, table->requires_grad);
    out->inputs = {table};
    Tensor* o = out.get();
    out->backward_fn = [table, o, index, dcols]() {
        if (!table->requires_grad) {
            return;
        }
        std::vector<double> gt(table->data.size(), 0.0);
        for (std::int64_t c = 0; c < dcols; ++c) {
            gt[static_cast<std::size_t>(index * dcols + c)] = o->grad[static_cast<std::size_t>(c)];
        }
        table->accum_grad(gt);
    };
    return out;
}

}  // namespace leadnet
