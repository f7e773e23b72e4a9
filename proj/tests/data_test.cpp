#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "tnq/data.hpp"
#include "tnq/model.hpp"

using namespace tnq;

namespace {

class TempDir : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("tnq_data_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::filesystem::path dir_;
};

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(std::uint8_t(x >> 24));
    v.push_back(std::uint8_t(x >> 16));
    v.push_back(std::uint8_t(x >> 8));
    v.push_back(std::uint8_t(x));
}

using IdxFiles = TempDir;

TEST_F(IdxFiles, WriteThenLoadRoundTrips) {
    CounterRng rng(5);
    RawIdx raw = synth_digits(60, rng);
    write_idx(raw, path("img"), path("lab"));
    Dataset ds = load_idx(path("img"), path("lab"));
    EXPECT_EQ(ds.n, 60u);
    EXPECT_EQ(ds.dim, 784u);
    EXPECT_EQ(ds.num_classes, 10);
    ASSERT_EQ(ds.features.size(), 60u * 784u);
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        EXPECT_DOUBLE_EQ(ds.features[i], raw.pixels[i] / 255.0);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(int(ds.labels[i]), int(raw.labels[i]));
}

TEST_F(IdxFiles, PixelScalingEndpoints) {
    RawIdx raw;
    raw.n = 2;
    raw.rows = 1;
    raw.cols = 1;
    raw.pixels = {0, 255};
    raw.labels = {1, 0};
    write_idx(raw, path("img"), path("lab"));
    Dataset ds = load_idx(path("img"), path("lab"));
    EXPECT_DOUBLE_EQ(ds.features[0], 0.0);
    EXPECT_DOUBLE_EQ(ds.features[1], 1.0);
    EXPECT_EQ(ds.num_classes, 2);
}

TEST_F(IdxFiles, RejectsBadMagic) {
    std::vector<std::uint8_t> img;
    push_u32(img, 0x00000805);  // wrong type code
    push_u32(img, 1);
    push_u32(img, 1);
    push_u32(img, 1);
    img.push_back(7);
    write_file(path("img"), img);
    std::vector<std::uint8_t> lab;
    push_u32(lab, 0x00000801);
    push_u32(lab, 1);
    lab.push_back(0);
    write_file(path("lab"), lab);
    EXPECT_THROW(load_idx(path("img"), path("lab")), FormatError);
}

TEST_F(IdxFiles, RejectsCountMismatch) {
    std::vector<std::uint8_t> img;
    push_u32(img, 0x00000803);
    push_u32(img, 2);
    push_u32(img, 1);
    push_u32(img, 1);
    img.push_back(1);
    img.push_back(2);
    write_file(path("img"), img);
    std::vector<std::uint8_t> lab;
    push_u32(lab, 0x00000801);
    push_u32(lab, 3);  // three labels for two images
    lab.push_back(0);
    lab.push_back(1);
    lab.push_back(0);
    write_file(path("lab"), lab);
    EXPECT_THROW(load_idx(path("img"), path("lab")), FormatError);
}

TEST_F(IdxFiles, RejectsTruncatedPixels) {
    std::vector<std::uint8_t> img;
    push_u32(img, 0x00000803);
    push_u32(img, 2);
    push_u32(img, 2);
    push_u32(img, 2);
    for (int i = 0; i < 5; ++i) img.push_back(std::uint8_t(i));  // needs 8
    write_file(path("img"), img);
    std::vector<std::uint8_t> lab;
    push_u32(lab, 0x00000801);
    push_u32(lab, 2);
    lab.push_back(0);
    lab.push_back(1);
    write_file(path("lab"), lab);
    EXPECT_THROW(load_idx(path("img"), path("lab")), FormatError);
}

TEST_F(IdxFiles, RejectsMissingFile) {
    EXPECT_THROW(load_idx(path("nope_img"), path("nope_lab")), FormatError);
}

TEST(SynthLaplace, GradientScaleMatchesGamma) {
    // At theta = 0 the per-sample gradient is -y_i x_i with unit-scale
    // Laplace features, so a gradient coordinate has mean absolute value
    // E|y| E|x| = gamma, and within one sample the coordinate profile is
    // |y_i| times a fresh Laplace vector.
    CounterRng rng(42);
    SynthTask task = synth_laplace_task(8, 10000, 0.7, rng);
    EXPECT_EQ(task.train.n, 10000u);
    EXPECT_EQ(task.train.dim, 8u);
    EXPECT_EQ(task.train.num_classes, 0);
    double abs_sum = 0.0;
    for (double y : task.train.labels) abs_sum += std::abs(y);
    EXPECT_NEAR(abs_sum / 10000.0, 0.7, 0.05 * 0.7);
    double feat_sum = 0.0;
    for (double x : task.train.features) feat_sum += std::abs(x);
    EXPECT_NEAR(feat_sum / double(task.train.features.size()), 1.0, 0.05);
    double grad_sum = 0.0;
    for (std::size_t i = 0; i < task.train.n; ++i)
        grad_sum += std::abs(task.train.labels[i] * task.train.features[i * 8 + 3]);
    EXPECT_NEAR(grad_sum / 10000.0, 0.7, 0.05 * 0.7);
}

TEST(SynthLaplace, MinimizerIsTheArgmin) {
    CounterRng rng(7);
    SynthTask task = synth_laplace_task(16, 512, 1.0, rng);
    ModelSpec spec = ModelSpec::linreg(16);
    Params at_min = {task.minimizer};
    double loss_min = dataset_loss(spec, at_min, task.train);
    EXPECT_NEAR(loss_min, task.min_loss, 1e-10);
    CounterRng perturb(8);
    for (int trial = 0; trial < 100; ++trial) {
        Params other = at_min;
        for (auto& w : other[0]) w += 0.05 * (2.0 * perturb.uniform() - 1.0);
        EXPECT_GE(dataset_loss(spec, other, task.train), loss_min - 1e-12);
    }
}

TEST(SynthLaplace, InterpolatesWithSquareDesign) {
    CounterRng rng(3);
    SynthTask task = synth_laplace_task(1, 1, 1.0, rng);
    EXPECT_NEAR(task.min_loss, 0.0, 1e-16);
    EXPECT_DOUBLE_EQ(task.minimizer[0] * task.train.features[0], task.train.labels[0]);
}

TEST(SynthLaplace, RejectsRankDeficientDesign) {
    // Fewer samples than features: the normal equations are singular.
    CounterRng rng(4);
    EXPECT_THROW(synth_laplace_task(4, 3, 1.0, rng), NumericalError);
}

TEST(SynthLaplace, SmoothnessIsTheTopEigenvalue) {
    CounterRng rng(11);
    SynthTask task = synth_laplace_task(8, 4096, 1.0, rng);
    // Unit-scale Laplace features have variance 2, so X^T X / n approaches
    // 2 I and lambda_max sits near 2 at this sample count.
    EXPECT_GT(task.smoothness, 1.6);
    EXPECT_LT(task.smoothness, 3.0);
    // Gradient Lipschitz bound holds along random segments: ||grad f(a) -
    // grad f(b)|| <= nu ||a - b||.
    ModelSpec spec = ModelSpec::linreg(8);
    CounterRng perturb(12);
    std::vector<std::size_t> all(task.train.n);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    for (int trial = 0; trial < 20; ++trial) {
        Params a = {GradientVector(8)}, b = {GradientVector(8)};
        for (int j = 0; j < 8; ++j) {
            a[0][std::size_t(j)] = 2.0 * perturb.uniform() - 1.0;
            b[0][std::size_t(j)] = 2.0 * perturb.uniform() - 1.0;
        }
        Params ga, gb;
        model_loss_grad(spec, a, task.train, all, &ga);
        model_loss_grad(spec, b, task.train, all, &gb);
        double gn = 0.0, dn = 0.0;
        for (int j = 0; j < 8; ++j) {
            double gd = ga[0][std::size_t(j)] - gb[0][std::size_t(j)];
            double pd = a[0][std::size_t(j)] - b[0][std::size_t(j)];
            gn += gd * gd;
            dn += pd * pd;
        }
        EXPECT_LE(std::sqrt(gn), task.smoothness * std::sqrt(dn) * (1.0 + 1e-9));
    }
}

TEST(SynthLaplace, TestSplitAndValidation) {
    CounterRng rng(1);
    SynthTask task = synth_laplace_task(4, 100, 1.0, rng, 32);
    EXPECT_EQ(task.test.n, 32u);
    EXPECT_EQ(task.test.dim, 4u);
    CounterRng rng2(2);
    EXPECT_THROW(synth_laplace_task(0, 10, 1.0, rng2), InvalidArgument);
    EXPECT_THROW(synth_laplace_task(4, 0, 1.0, rng2), InvalidArgument);
}

TEST(SynthDigits, ShapesAndLabels) {
    CounterRng rng(9);
    RawIdx raw = synth_digits(200, rng);
    EXPECT_EQ(raw.n, 200u);
    EXPECT_EQ(raw.rows, 28u);
    EXPECT_EQ(raw.cols, 28u);
    EXPECT_EQ(raw.pixels.size(), 200u * 784u);
    ASSERT_EQ(raw.labels.size(), 200u);
    int counts[10] = {};
    for (auto l : raw.labels) {
        ASSERT_LT(l, 10);
        ++counts[l];
    }
    for (int c = 0; c < 10; ++c) EXPECT_EQ(counts[c], 20);
}

TEST(SynthDigits, ClassesAreSeparated) {
    CounterRng rng(10);
    RawIdx raw = synth_digits(400, rng);
    Dataset ds = to_dataset(raw, "digits");
    // Mean images of distinct classes differ substantially.
    std::vector<std::vector<double>> mean(10, std::vector<double>(784, 0.0));
    int counts[10] = {};
    for (std::size_t i = 0; i < ds.n; ++i) {
        int c = int(ds.labels[i]);
        ++counts[c];
        auto row = ds.row(i);
        for (std::size_t j = 0; j < 784; ++j) mean[std::size_t(c)][j] += row[j];
    }
    for (int c = 0; c < 10; ++c)
        for (auto& v : mean[std::size_t(c)]) v /= counts[c];
    for (int a = 0; a < 10; ++a) {
        for (int b = a + 1; b < 10; ++b) {
            double dist = 0.0;
            for (std::size_t j = 0; j < 784; ++j) {
                double d = mean[std::size_t(a)][j] - mean[std::size_t(b)][j];
                dist += d * d;
            }
            EXPECT_GT(std::sqrt(dist), 1.0) << a << " vs " << b;
        }
    }
}

TEST(PartitionData, EqualSplitSizes) {
    CounterRng rng(1);
    Partition p = partition(10, 2, PartitionMode::iid_equal, rng);
    ASSERT_EQ(p.shards.size(), 2u);
    EXPECT_EQ(p.shards[0].size(), 5u);
    EXPECT_EQ(p.shards[1].size(), 5u);

    CounterRng rng2(2);
    Partition q = partition(11, 3, PartitionMode::iid_equal, rng2);
    std::multiset<std::size_t> sizes;
    for (const auto& s : q.shards) sizes.insert(s.size());
    EXPECT_EQ(sizes, (std::multiset<std::size_t>{3, 4, 4}));
}

TEST(PartitionData, ShardsAreADisjointCover) {
    for (std::uint64_t seed : {1, 2, 3}) {
        CounterRng rng(seed);
        Partition p = partition(257, 7, PartitionMode::iid_equal, rng);
        std::set<std::size_t> seen;
        for (const auto& shard : p.shards)
            for (auto i : shard) {
                EXPECT_LT(i, 257u);
                EXPECT_TRUE(seen.insert(i).second) << "duplicate index " << i;
            }
        EXPECT_EQ(seen.size(), 257u);
    }
}

TEST(PartitionData, SizedSplitFollowsWeights) {
    CounterRng rng(5);
    std::vector<double> sizing{0.75, 0.25};
    Partition p = partition(100, 2, PartitionMode::iid_sized, rng, sizing);
    EXPECT_EQ(p.shards[0].size(), 75u);
    EXPECT_EQ(p.shards[1].size(), 25u);
    std::vector<double> w = p.weights();
    EXPECT_DOUBLE_EQ(w[0], 0.75);
    EXPECT_DOUBLE_EQ(w[1], 0.25);
}

TEST(PartitionData, SizedSplitKeepsEveryShardNonempty) {
    CounterRng rng(6);
    std::vector<double> sizing{0.99, 0.01};
    Partition p = partition(10, 2, PartitionMode::iid_sized, rng, sizing);
    EXPECT_GE(p.shards[0].size(), 1u);
    EXPECT_GE(p.shards[1].size(), 1u);
    EXPECT_EQ(p.shards[0].size() + p.shards[1].size(), 10u);
}

TEST(PartitionData, DeterministicInTheStream) {
    CounterRng a(77);
    CounterRng b(77);
    Partition pa = partition(64, 4, PartitionMode::iid_equal, a);
    Partition pb = partition(64, 4, PartitionMode::iid_equal, b);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pa.shards[c], pb.shards[c]);
}

TEST(PartitionData, Validation) {
    CounterRng rng(1);
    EXPECT_THROW(partition(3, 4, PartitionMode::iid_equal, rng), InvalidArgument);
    EXPECT_THROW(partition(10, 0, PartitionMode::iid_equal, rng), InvalidArgument);
    std::vector<double> bad{0.5};
    EXPECT_THROW(partition(10, 2, PartitionMode::iid_sized, rng, bad), InvalidArgument);
    std::vector<double> negative{1.5, -0.5};
    EXPECT_THROW(partition(10, 2, PartitionMode::iid_sized, rng, negative), InvalidArgument);
}

}  // namespace
