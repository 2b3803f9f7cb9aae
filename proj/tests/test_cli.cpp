#include "carh/cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "carh");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = carh::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("carh_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path sub(const std::string& name) {
        const fs::path p = dir_ / name;
        fs::create_directories(p);
        return p;
    }
    void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateIsDeterministic) {
    const auto a = sub("a"), b = sub("b");
    ASSERT_EQ(run({"simulate", "--seed", "5", "--n", "30", "--set", "m=12", "--out", a.string()}).code, 0);
    ASSERT_EQ(run({"simulate", "--seed", "5", "--n", "30", "--set", "m=12", "--out", b.string()}).code, 0);
    for (const char* f : {"curves.csv", "covariates.csv", "truth.txt"}) {
        EXPECT_FALSE(slurp(a / f).empty()) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto c = sub("c");
    ASSERT_EQ(run({"simulate", "--seed", "6", "--n", "30", "--set", "m=12", "--out", c.string()}).code, 0);
    EXPECT_NE(slurp(a / "curves.csv"), slurp(c / "curves.csv"));
    EXPECT_NE(slurp(a / "truth.txt").find("contraction = "), std::string::npos);
}

TEST_F(CliTest, ExitCodeTaxonomy) {
    EXPECT_EQ(run({}).code, carh::cli::kUsageError);
    EXPECT_EQ(run({"simulate", "--bogus"}).code, carh::cli::kUsageError);
    EXPECT_EQ(run({"evaluate", "--out", dir_.string()}).code, carh::cli::kUsageError);
    EXPECT_EQ(run({"evaluate", "--data", (dir_ / "nope.csv").string(), "--covariates", "x", "--out", dir_.string()}).code,
              carh::cli::kDataError);

    write(dir_ / "bad.cfg", "this line has no equals\n");
    EXPECT_EQ(run({"simulate", "--config", (dir_ / "bad.cfg").string()}).code, carh::cli::kDataError);

    // Two distinct curves leave a one-dimensional centred span, so k_n = 3 is not estimable.
    write(dir_ / "c.csv", "k,t_1,t_2,t_3,t_4\n1,1,2,3,4\n2,4,3,2,1\n3,1,2,3,4\n");
    write(dir_ / "v.csv", "k,v_1\n1,0.1\n2,0.2\n3,0.3\n");
    const Result r = run({"fit", "--data", (dir_ / "c.csv").string(), "--covariates", (dir_ / "v.csv").string(),
                          "--class", "arh-projection", "--kn", "3", "--out", dir_.string()});
    EXPECT_EQ(r.code, carh::cli::kNumericalError) << r.err;
    EXPECT_NE(r.err.find("arh-projection"), std::string::npos) << r.err;
}

TEST_F(CliTest, PredictOnConstantDataReturnsTheConstant) {
    std::ostringstream curves, covs;
    curves << "k,t_1,t_2,t_3,t_4\n";
    covs << "k,v_1\n";
    for (int k = 1; k <= 10; ++k) {
        curves << k << ",2.5,2.5,2.5,2.5\n";
        covs << k << ',' << 0.1 * k << '\n';
    }
    write(dir_ / "c.csv", curves.str());
    write(dir_ / "v.csv", covs.str());
    ASSERT_EQ(run({"fit", "--data", (dir_ / "c.csv").string(), "--covariates", (dir_ / "v.csv").string(), "--class",
                   "carh-projection", "--kn", "1", "--alpha", "0.01", "--out", dir_.string()})
                  .code,
              0);
    ASSERT_TRUE(fs::exists(dir_ / "model.json"));
    const Result r = run({"predict", "--model", (dir_ / "model.json").string(), "--next-covariate", "0.35", "--out",
                          dir_.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(dir_ / "prediction.csv"), "k,t_1,t_2,t_3,t_4\n11,2.5,2.5,2.5,2.5\n");
    EXPECT_EQ(run({"predict", "--model", (dir_ / "model.json").string(), "--next-covariate", "0.3,0.4", "--out",
                   dir_.string()})
                  .code,
              carh::cli::kDataError);
}

TEST_F(CliTest, EvaluateReportLayoutAndDeterminism) {
    const auto data = sub("data");
    ASSERT_EQ(run({"simulate", "--seed", "3", "--n", "60", "--set", "m=8", "--out", data.string()}).code, 0);
    const std::vector<std::string> args{"evaluate",       "--data",  (data / "curves.csv").string(),
                                        "--covariates",   (data / "covariates.csv").string(),
                                        "--class",        "arh-projection,carh-projection,carh-resolvent",
                                        "--kn",           "1:3",
                                        "--alpha",        "0.01,0.1",
                                        "--p",            "0",
                                        "--ha",           "0.2",
                                        "--hgamma",       "0.2",
                                        "--hdelta",       "0.2",
                                        "--baseline",     "--plot"};
    auto with_out = [&](const fs::path& o) {
        auto a = args;
        a.push_back("--out");
        a.push_back(o.string());
        return a;
    };
    const auto o1 = sub("o1"), o2 = sub("o2");
    const Result r1 = run(with_out(o1));
    ASSERT_EQ(r1.code, 0) << r1.err;
    ASSERT_EQ(run(with_out(o2)).code, 0);
    EXPECT_EQ(slurp(o1 / "report.csv"), slurp(o2 / "report.csv"));
    EXPECT_EQ(slurp(o1 / "plot.csv"), slurp(o2 / "plot.csv"));

    std::istringstream report(slurp(o1 / "report.csv"));
    std::string line;
    std::getline(report, line);
    EXPECT_EQ(line, "class,k_n,p,alpha,h_a,h_gamma,h_delta,estimation_error,prediction_error");
    std::vector<std::string> rows;
    while (std::getline(report, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].rfind("arh-projection,", 0), 0u);
    EXPECT_NE(rows[0].find(",NA,NA,NA,NA,NA,"), std::string::npos) << rows[0];
    EXPECT_EQ(rows[1].rfind("carh-projection,", 0), 0u);
    EXPECT_EQ(rows[2].rfind("carh-resolvent,NA,0,", 0), 0u) << rows[2];
    EXPECT_EQ(rows[3].rfind("persistence,", 0), 0u);

    // Test window is 12 curves of 8 points for each of the three classes.
    const std::string plot = slurp(o1 / "plot.csv");
    EXPECT_EQ(std::count(plot.begin(), plot.end(), '\n'), 1 + 3 * 12 * 8);
}

TEST_F(CliTest, SelectWritesBestConfigThatFitReads) {
    const auto data = sub("data");
    ASSERT_EQ(run({"simulate", "--seed", "4", "--n", "50", "--set", "m=8", "--out", data.string()}).code, 0);
    const Result r = run({"select", "--data", (data / "curves.csv").string(), "--covariates",
                          (data / "covariates.csv").string(), "--kn", "1,2", "--ha", "0.1,0.3", "--hgamma", "0.3",
                          "--hdelta", "0.3", "--out", dir_.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string table = slurp(dir_ / "select_report.csv");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 1 + 4);
    const fs::path best = dir_ / "best_carh-projection.cfg";
    ASSERT_TRUE(fs::exists(best));

    const Result f = run({"fit", "--config", best.string(), "--data", (data / "curves.csv").string(), "--covariates",
                          (data / "covariates.csv").string(), "--out", dir_.string()});
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NE(f.out.find("carh-projection,"), std::string::npos);
}

TEST_F(CliTest, LongFormatIngestionWithCvCovariate) {
    std::ostringstream load, temp;
    load << "timestamp,value\n";
    temp << "timestamp,value\n";
    const std::int64_t start = *carh::io::parse_timestamp("2022-03-07T00:00");
    for (int r = 0; r < 48 * 12; ++r) load << start + r * 1800 << ',' << 100 + (r % 48) + (r / 48) << '\n';
    for (int r = 0; r < 24 * 12; ++r) temp << start + r * 3600 << ',' << 10 + (r % 24) * 0.1 * (1 + r / 24) << '\n';
    write(dir_ / "load.csv", load.str());
    write(dir_ / "temp.csv", temp.str());
    const Result r = run({"fit", "--long-data", (dir_ / "load.csv").string(), "--cv-from", (dir_ / "temp.csv").string(),
                          "--include", "1,2,3,4,5,8,9,10,11,12", "--class", "arh-projection", "--out", dir_.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string model = slurp(dir_ / "model.json");
    EXPECT_NE(model.find("\"m\": 48"), std::string::npos);
}
