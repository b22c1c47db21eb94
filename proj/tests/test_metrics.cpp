/*
 * candidefit - deformable 3D face model fitting and emotion features.
 *
 * File: tests/test_metrics.cpp
 *
 * Copyright 2026 The candidefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>

#include "candide/metrics.hpp"
#include "candide/rng.hpp"
#include "oracles.hpp"

using namespace candide;
using metrics::ConfusionMatrix;

namespace {

ConfusionMatrix matrix_2x2(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d)
{
    ConfusionMatrix m(2);
    m.add(0, 0, a);
    m.add(0, 1, b);
    m.add(1, 0, c);
    m.add(1, 1, d);
    return m;
}

} // namespace

TEST_CASE("accuracy trivial and hand cases")
{
    ConfusionMatrix diagonal(3);
    diagonal.add(0, 0, 5);
    diagonal.add(1, 1, 2);
    diagonal.add(2, 2, 9);
    CHECK(metrics::accuracy(diagonal) == 1.0);

    CHECK(metrics::accuracy(matrix_2x2(0, 3, 4, 0)) == 0.0);
    CHECK(metrics::accuracy(matrix_2x2(2, 0, 1, 1)) == 0.75);
    CHECK_THROWS_AS(metrics::accuracy(ConfusionMatrix(2)), std::invalid_argument);
}

TEST_CASE("kappa trivial and hand cases")
{
    ConfusionMatrix balanced(4);
    for (int k = 0; k < 4; ++k)
        balanced.add(k, k, 10);
    CHECK(metrics::cohens_kappa(balanced) == 1.0);

    CHECK(metrics::cohens_kappa(matrix_2x2(25, 25, 25, 25)) == 0.0);
    CHECK(metrics::cohens_kappa(matrix_2x2(2, 0, 1, 1)) == 0.5);

    ConfusionMatrix single(2);
    single.add(0, 0, 7);
    CHECK_THROWS_WITH_AS(metrics::cohens_kappa(single), "cohens_kappa: degenerate marginals",
                         std::invalid_argument);
}

TEST_CASE("kappa reaches one exactly when the off-diagonal vanishes")
{
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial)
    {
        ConfusionMatrix m(3);
        bool off_diagonal = false;
        for (int i = 0; i < 3; ++i)
        {
            for (int j = 0; j < 3; ++j)
            {
                const auto c = static_cast<std::int64_t>(rng.uniform_int(4));
                m.add(i, j, c);
                if (i != j && c > 0)
                    off_diagonal = true;
            }
        }
        if (m.total() == 0)
            continue;
        double kappa;
        try
        {
            kappa = metrics::cohens_kappa(m);
        }
        catch (const std::invalid_argument&)
        {
            continue; // degenerate marginals
        }
        CHECK(kappa <= 1.0);
        if (!off_diagonal)
            CHECK(kappa == 1.0);
        else
            CHECK(kappa < 1.0);
    }
}

TEST_CASE("weighted F1 trivial and hand cases")
{
    ConfusionMatrix diagonal(4);
    for (int k = 0; k < 4; ++k)
        diagonal.add(k, k, 3 + k);
    CHECK(metrics::weighted_f1(diagonal) == 1.0);

    // class 0: P = 2/3, R = 1, F1 = 0.8; class 1: P = 1, R = 0.5, F1 = 2/3
    CHECK(metrics::weighted_f1(matrix_2x2(2, 0, 1, 1)) ==
          doctest::Approx(11.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("weighted F1 collapses to the support-weighted mean when P equals R")
{
    // symmetric confusions give per-class precision == recall
    ConfusionMatrix m(2);
    m.add(0, 0, 8);
    m.add(0, 1, 2);
    m.add(1, 0, 2);
    m.add(1, 1, 8);
    const auto stats = metrics::per_class_stats(m);
    for (const auto& s : stats)
        CHECK(s.precision == s.recall);
    const double expected = 0.5 * stats[0].precision + 0.5 * stats[1].precision;
    CHECK(metrics::weighted_f1(m) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("f_beta formula cases")
{
    CHECK(metrics::f_beta(0.8, 0.8, 1.0) == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(metrics::f_beta(0.37, 0.9, 0.0) == 0.37);
    CHECK(metrics::f_beta(0.5, 1.0, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(metrics::f_beta(0.0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("metrics are invariant to class relabeling")
{
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial)
    {
        ConfusionMatrix m(4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                m.add(i, j, static_cast<std::int64_t>(rng.uniform_int(6)) + (i == j ? 1 : 0));

        std::vector<int> perm{0, 1, 2, 3};
        rng.shuffle(perm);
        ConfusionMatrix permuted(4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                permuted.add(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)],
                             m(i, j));

        CHECK(metrics::accuracy(permuted) == doctest::Approx(metrics::accuracy(m)).epsilon(1e-14));
        CHECK(metrics::cohens_kappa(permuted) ==
              doctest::Approx(metrics::cohens_kappa(m)).epsilon(1e-14));
        CHECK(metrics::weighted_f1(permuted) ==
              doctest::Approx(metrics::weighted_f1(m)).epsilon(1e-14));
    }
}

TEST_CASE("scaling all counts by a positive integer changes nothing")
{
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial)
    {
        ConfusionMatrix m(3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                m.add(i, j, static_cast<std::int64_t>(rng.uniform_int(5)) + (i == j ? 1 : 0));
        const auto factor = static_cast<std::int64_t>(rng.uniform_int(9) + 2);
        ConfusionMatrix scaled(3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                scaled.add(i, j, factor * m(i, j));

        // exact: the rational values are identical, so correctly rounded
        // divisions agree bitwise
        CHECK(metrics::accuracy(scaled) == metrics::accuracy(m));
        CHECK(metrics::cohens_kappa(scaled) == metrics::cohens_kappa(m));
        CHECK(metrics::weighted_f1(scaled) == metrics::weighted_f1(m));
    }
}

TEST_CASE("matrix metrics agree exactly with the pair-list oracle")
{
    // enumerate every 3x3 count matrix with N <= 5 and compare against the
    // direct pair-list computation; the acceptance suite drives the same
    // check over all sequences of length <= 8
    std::array<std::int64_t, 9> cells{};
    const int max_total = 5;
    long checked = 0;

    auto compare = [&]() {
        std::vector<std::pair<int, int>> pairs;
        ConfusionMatrix m(3);
        for (int i = 0; i < 3; ++i)
        {
            for (int j = 0; j < 3; ++j)
            {
                const auto c = cells[static_cast<std::size_t>(3 * i + j)];
                m.add(i, j, c);
                for (std::int64_t r = 0; r < c; ++r)
                    pairs.emplace_back(i, j);
            }
        }
        if (pairs.empty())
            return;
        const auto expected = oracle::metrics_from_pairs(pairs, 3);
        CHECK(metrics::accuracy(m) == expected.accuracy);
        CHECK(metrics::weighted_f1(m) == expected.weighted_f1);

        double p_e = 0.0;
        const double n = static_cast<double>(m.total());
        for (int k = 0; k < 3; ++k)
            p_e += (static_cast<double>(m.row_sum(k)) / n) *
                   (static_cast<double>(m.col_sum(k)) / n);
        if (p_e != 1.0)
            CHECK(metrics::cohens_kappa(m) == expected.kappa);
        ++checked;
    };

    // odometer over all cell assignments with sum <= max_total
    std::function<void(int, int)> recurse = [&](int cell, int remaining) {
        if (cell == 9)
        {
            compare();
            return;
        }
        for (int c = 0; c <= remaining; ++c)
        {
            cells[static_cast<std::size_t>(cell)] = c;
            recurse(cell + 1, remaining - c);
        }
        cells[static_cast<std::size_t>(cell)] = 0;
    };
    recurse(0, max_total);
    CHECK(checked > 1000);
}

TEST_CASE("report json is internally consistent")
{
    ConfusionMatrix m(4);
    Rng rng(37);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            m.add(i, j, static_cast<std::int64_t>(rng.uniform_int(10)) + (i == j ? 5 : 0));

    const std::vector<std::string> names{"angry", "neutral", "smile", "surprised"};
    const auto report = metrics::report_json(m, names);
    CHECK(report["accuracy"].get<double>() == metrics::accuracy(m));
    CHECK(report["kappa"].get<double>() == metrics::cohens_kappa(m));
    CHECK(report["weighted_f1"].get<double>() == metrics::weighted_f1(m));
    CHECK(report["confusion"][1][2].get<std::int64_t>() == m(1, 2));
    CHECK(report["per_class"]["angry"]["support"].get<std::int64_t>() == m.row_sum(0));
}
