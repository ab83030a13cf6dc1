#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "leadnet/errors.hpp"
#include "leadnet/tensor.hpp"
#include "support/fd_check.hpp"

using namespace leadnet;
using test_support::check_gradients;

namespace {

std::vector<NamedParam> as_params(std::initializer_list<std::pair<const char*, TensorPtr>> list) {
    std::vector<NamedParam> out;
    for (const auto& [name, t] : list) {
        out.push_back({name, ParamGroup::Classifier, t});
    }
    return out;
}

}  // namespace

TEST_CASE("matmul identity and hand product") {
    auto eye = tensor({1, 0, 0, 1}, {2, 2});
    auto x = tensor({3, -1, 2, 5}, {2, 2});
    auto prod = matmul(eye, x);
    CHECK(prod->data == x->data);

    auto a = tensor({1, 2, 3, 4}, {2, 2});
    auto b = tensor({1, 1}, {2, 1});
    auto c = matmul(a, b);
    CHECK(c->data[0] == doctest::Approx(3.0));
    CHECK(c->data[1] == doctest::Approx(7.0));

    CHECK_THROWS_AS(matmul(a, tensor({1, 2, 3}, {3, 1})), ShapeError);
}

TEST_CASE("matmul gradient equals row sums of B and passes finite differences") {
    Rng rng(11);
    auto a = randn({3, 4}, rng, 1.0, true);
    auto b = randn({4, 2}, rng, 1.0, true);
    auto loss = sum_all(matmul(a, b));
    loss->backward();
    // d(sum(A B))/dA[i,p] = sum_j B[p,j]
    for (std::int64_t i = 0; i < 3; ++i) {
        for (std::int64_t p = 0; p < 4; ++p) {
            double row_sum = 0.0;
            for (std::int64_t j = 0; j < 2; ++j) {
                row_sum += b->at(p, j);
            }
            CHECK(a->grad[static_cast<std::size_t>(i * 4 + p)] == doctest::Approx(row_sum).epsilon(1e-9));
        }
    }

    const auto check = check_gradients(as_params({{"a", a}, {"b", b}}),
                                       [&]() { return sum_all(matmul(a, b)); });
    CHECK(check.max_rel_err < 1e-5);
}

TEST_CASE("softmax values, stability and normalization") {
    auto sym = softmax(tensor({0, 0}, {2}));
    CHECK(sym->data[0] == doctest::Approx(0.5));
    CHECK(sym->data[1] == doctest::Approx(0.5));

    auto two = softmax(tensor({2, 0}, {2}));
    CHECK(two->data[0] == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(two->data[1] == doctest::Approx(0.1192).epsilon(1e-4));

    auto big = softmax(tensor({1000, 0}, {2}));
    CHECK(big->data[0] == doctest::Approx(1.0));
    CHECK(big->data[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(big->data[0]));

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = randn({4, 7}, rng, 3.0);
        auto y = softmax(x);
        for (std::int64_t r = 0; r < 4; ++r) {
            double sum = 0.0;
            for (std::int64_t c = 0; c < 7; ++c) {
                sum += y->at(r, c);
            }
            CHECK(std::abs(sum - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("softmax gradient vs finite differences") {
    Rng rng(17);
    auto x = randn({3, 5}, rng, 1.0, true);
    auto w = randn({3, 5}, rng, 1.0);  // fixed mixing so the loss depends on all outputs
    const auto make_loss = [&]() { return sum_all(mul(softmax(x), w)); };
    const auto check = check_gradients(as_params({{"x", x}}), make_loss);
    CHECK(check.max_rel_err < 1e-5);
}

TEST_CASE("layer_norm constant row and hand case") {
    auto gain = full({1, 2}, 1.0);
    auto bias = zeros({1, 2});
    auto constant = layer_norm(tensor({3, 3}, {1, 2}), gain, bias);
    CHECK(constant->data[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(constant->data[1] == doctest::Approx(0.0).epsilon(1e-9));

    auto row = layer_norm(tensor({1, 3}, {1, 2}), gain, bias, 1e-12);
    CHECK(row->data[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(row->data[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm gradient vs finite differences") {
    Rng rng(23);
    auto x = randn({4, 6}, rng, 1.5, true);
    auto gain = randn({1, 6}, rng, 0.5, true);
    auto bias = randn({1, 6}, rng, 0.5, true);
    auto w = randn({4, 6}, rng, 1.0);
    const auto make_loss = [&]() { return sum_all(mul(layer_norm(x, gain, bias), w)); };
    const auto check = check_gradients(as_params({{"x", x}, {"gain", gain}, {"bias", bias}}), make_loss);
    CHECK(check.max_rel_err < 1e-5);
}

TEST_CASE("dropout modes and statistics") {
    Rng rng(31);
    auto x = full({100}, 1.0, true);

    auto eval_out = dropout(x, 0.8, /*training=*/false, rng);
    CHECK(eval_out->data == x->data);

    auto p0 = dropout(x, 0.0, /*training=*/true, rng);
    CHECK(p0->data == x->data);

    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ConfigError);

    auto big = full({100000}, 1.0);
    auto dropped = dropout(big, 0.8, /*training=*/true, rng);
    long long survivors = 0;
    double mean = 0.0;
    for (double v : dropped->data) {
        survivors += v != 0.0 ? 1 : 0;
        mean += v;
    }
    mean /= static_cast<double>(dropped->data.size());
    CHECK(std::abs(static_cast<double>(survivors) / 100000.0 - 0.2) < 0.01);
    CHECK(std::abs(mean - 1.0) < 0.02);
}

TEST_CASE("cross_entropy values and errors") {
    auto uniform = cross_entropy(zeros({1, 5}), {2});
    CHECK(uniform->item() == doctest::Approx(std::log(5.0)).epsilon(1e-4));

    auto saturated = cross_entropy(tensor({30, 0, 0}, {1, 3}), {0});
    CHECK(saturated->item() < 1e-9);

    auto two = cross_entropy(tensor({1, 0}, {1, 2}), {0});
    CHECK(two->item() == doctest::Approx(0.3133).epsilon(1e-3));

    CHECK_THROWS_AS(cross_entropy(zeros({1, 3}), {3}), DataError);
    CHECK_THROWS_AS(cross_entropy(zeros({1, 3}), {-1}), DataError);
}

TEST_CASE("cross_entropy gradient vs finite differences") {
    Rng rng(41);
    auto logits = randn({5, 4}, rng, 1.0, true);
    const std::vector<int> targets{0, 3, 1, 2, 0};
    const auto check = check_gradients(as_params({{"logits", logits}}),
                                       [&]() { return cross_entropy(logits, targets); });
    CHECK(check.max_rel_err < 1e-5);
}

TEST_CASE("embedding lookup, scatter gradient and accumulation") {
    auto eye = tensor({1, 0, 0, 0, 1, 0, 0, 0, 1}, {3, 3}, true);
    auto row = embedding_row(eye, 1);
    CHECK(row->data == std::vector<double>{0, 1, 0});
    CHECK_THROWS_AS(embedding_row(eye, 3), DataError);

    // single lookup: upstream gradient lands in the looked-up row
    eye->zero_grad();
    auto loss = sum_all(embedding_row(eye, 2));
    loss->backward();
    CHECK(eye->grad == std::vector<double>{0, 0, 0, 0, 0, 0, 1, 1, 1});

    // two lookups of the same index accumulate twice
    eye->zero_grad();
    auto twice = add(embedding_row(eye, 0), embedding_row(eye, 0));
    sum_all(twice)->backward();
    CHECK(eye->grad == std::vector<double>{2, 2, 2, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("fan-out accumulates gradients additively") {
    // z = x*y + x  =>  dz/dx = y + 1, dz/dy = x
    auto x = tensor({3.0}, {1}, true);
    auto y = tensor({5.0}, {1}, true);
    auto z = add(mul(x, y), x);
    z->backward();
    CHECK(x->grad[0] == doctest::Approx(6.0));
    CHECK(y->grad[0] == doctest::Approx(3.0));
}

TEST_CASE("ops are deterministic for a fixed seed") {
    const auto run = []() {
        Rng rng(99);
        auto x = randn({4, 4}, rng, 1.0, true);
        auto d = dropout(x, 0.5, true, rng);
        return sum_all(d)->item();
    };
    CHECK(run() == run());
}

TEST_CASE("composite ops: add_row, mean_rows, concat, transpose, tanh gradients") {
    Rng rng(53);
    auto m = randn({3, 4}, rng, 1.0, true);
    auto row = randn({1, 4}, rng, 1.0, true);
    auto w = randn({3, 4}, rng, 1.0);

    const auto simple_loss = [&]() { return sum_all(mul(tanh_op(add_row(m, row)), w)); };
    auto check = check_gradients(as_params({{"m", m}, {"row", row}}), simple_loss);
    CHECK(check.max_rel_err < 1e-5);

    const auto mean_loss = [&]() { return sum_all(mean_rows(mul(m, m))); };
    check = check_gradients(as_params({{"m", m}}), mean_loss);
    CHECK(check.max_rel_err < 1e-5);

    const auto concat_loss = [&]() { return sum_all(concat_rows({m, scale(m, 2.0)})); };
    check = check_gradients(as_params({{"m", m}}), concat_loss);
    CHECK(check.max_rel_err < 1e-5);

    const auto transpose_loss = [&]() { return sum_all(mul(transpose2d(m), transpose2d(w))); };
    check = check_gradients(as_params({{"m", m}}), transpose_loss);
    CHECK(check.max_rel_err < 1e-5);
}
