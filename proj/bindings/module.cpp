#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>

#include "flowids/data.hpp"
#include "flowids/eval.hpp"
#include "flowids/gradcheck.hpp"
#include "flowids/model.hpp"
#include "flowids/optim.hpp"

namespace py = pybind11;
using namespace flowids;

PYBIND11_MODULE(flowids, m) {
    m.doc() = "Hybrid CNN-LSTM intrusion-detection classifier for SCADA flow statistics";

    py::enum_<FitScope>(m, "FitScope")
        .value("TRAIN_ONLY", FitScope::TrainOnly)
        .value("WHOLE_DATASET", FitScope::WholeDataset);

    py::class_<FlowTable>(m, "FlowTable")
        .def_readonly("feature_names", &FlowTable::feature_names)
        .def_readonly("labels", &FlowTable::labels)
        .def_property_readonly("rows", &FlowTable::row_count)
        .def_property_readonly("features", &FlowTable::feature_count)
        .def("row", [](const FlowTable& t, std::size_t r) {
            auto row = t.row(r);
            return std::vector<double>(row.begin(), row.end());
        })
        .def("binary_labels", &FlowTable::binary_labels)
        .def("select_rows", &FlowTable::select_rows);

    m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column"),
          py::arg("drop_columns") = std::vector<std::string>{});
    m.def("clean", &clean);
    m.def("binarize_labels", &binarize_labels, py::arg("table"), py::arg("normal_label"));
    m.def("generate_synthetic", &generate_synthetic, py::arg("n_normal"), py::arg("n_attack"),
          py::arg("features"), py::arg("separation"), py::arg("seed"));
    m.def("write_csv", &write_csv, py::arg("table"), py::arg("path"));

    py::class_<NormalizationSpec>(m, "NormalizationSpec")
        .def_readonly("feature_names", &NormalizationSpec::feature_names)
        .def_readonly("mins", &NormalizationSpec::mins)
        .def_readonly("maxs", &NormalizationSpec::maxs);
    m.def("minmax_fit", &minmax_fit, py::arg("table"),
          py::arg("scope") = FitScope::TrainOnly);
    m.def("minmax_apply", &minmax_apply, py::arg("spec"), py::arg("table"));

    py::class_<SplitPlan>(m, "SplitPlan")
        .def_readonly("train_indices", &SplitPlan::train_indices)
        .def_readonly("test_indices", &SplitPlan::test_indices);
    m.def("stratified_split", &stratified_split, py::arg("table"), py::arg("ratio") = 0.7,
          py::arg("seed") = 42);

    py::class_<FoldPlan>(m, "FoldPlan").def_readonly("folds", &FoldPlan::folds);
    m.def("stratified_kfold", &stratified_kfold, py::arg("table"), py::arg("k") = 5,
          py::arg("seed") = 42);

    py::class_<ConvSpec>(m, "ConvSpec")
        .def(py::init<std::size_t, std::size_t>(), py::arg("filters") = 64,
             py::arg("kernel_size") = 3)
        .def_readwrite("filters", &ConvSpec::filters)
        .def_readwrite("kernel_size", &ConvSpec::kernel_size);

    py::class_<ArchitectureConfig>(m, "ArchitectureConfig")
        .def(py::init<>())
        .def_readwrite("input_features", &ArchitectureConfig::input_features)
        .def_readwrite("conv_blocks", &ArchitectureConfig::conv_blocks)
        .def_readwrite("pool", &ArchitectureConfig::pool)
        .def_readwrite("lstm_units", &ArchitectureConfig::lstm_units)
        .def_readwrite("dense_units", &ArchitectureConfig::dense_units)
        .def_readwrite("dropout_rate", &ArchitectureConfig::dropout_rate)
        .def("validate", &ArchitectureConfig::validate);

    py::class_<HybridModel>(m, "HybridModel")
        .def(py::init<ArchitectureConfig, std::uint64_t>(), py::arg("config"),
             py::arg("seed"))
        .def_property_readonly("config", &HybridModel::config)
        .def_property_readonly("init_seed", &HybridModel::init_seed)
        .def("parameter_names", &HybridModel::parameter_names)
        .def("forward_probability",
             [](const HybridModel& model, const std::vector<double>& x) {
                 return model.forward(x, Mode::Infer).probability;
             })
        .def("predict",
             [](const HybridModel& model, const std::vector<double>& x, double threshold) {
                 return predict(model, x, threshold);
             },
             py::arg("x"), py::arg("threshold") = 0.5);

    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("restore_best", &TrainConfig::restore_best)
        .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
        .def_readwrite("shuffle_seed", &TrainConfig::shuffle_seed)
        .def_readwrite("positive_class_weight", &TrainConfig::positive_class_weight);

    py::class_<EpochStats>(m, "EpochStats")
        .def_readonly("train_loss", &EpochStats::train_loss)
        .def_readonly("val_loss", &EpochStats::val_loss);

    py::class_<TrainRun>(m, "TrainRun")
        .def_readonly("history", &TrainRun::history)
        .def_readonly("stopped_epoch", &TrainRun::stopped_epoch)
        .def_readonly("best_epoch", &TrainRun::best_epoch)
        .def_readonly("best_val_loss", &TrainRun::best_val_loss);

    m.def("train",
          [](HybridModel& model, const FlowTable& table, const TrainConfig& cfg) {
              return train(model, table, cfg);
          },
          py::arg("model"), py::arg("table"), py::arg("config"));

    py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
        .def(py::init<>())
        .def_readwrite("tp", &ConfusionMatrix::tp)
        .def_readwrite("tn", &ConfusionMatrix::tn)
        .def_readwrite("fp", &ConfusionMatrix::fp)
        .def_readwrite("fn", &ConfusionMatrix::fn)
        .def("total", &ConfusionMatrix::total);

    py::class_<MetricSet>(m, "MetricSet")
        .def_readonly("accuracy", &MetricSet::accuracy)
        .def_readonly("precision", &MetricSet::precision)
        .def_readonly("recall", &MetricSet::recall)
        .def_readonly("f1", &MetricSet::f1)
        .def_readonly("loss", &MetricSet::loss)
        .def_readonly("degenerate", &MetricSet::degenerate);

    m.def("confusion", [](const std::vector<int>& pred, const std::vector<int>& truth) {
        return confusion(pred, truth);
    });
    m.def("metrics", &metrics);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("cm", &EvalResult::cm)
        .def_readonly("metrics", &EvalResult::metric_set);
    m.def("evaluate", &evaluate, py::arg("model"), py::arg("table"),
          py::arg("threshold") = 0.5);

    py::class_<CvResult>(m, "CvResult")
        .def_readonly("folds", &CvResult::folds)
        .def_readonly("means", &CvResult::means);
    m.def("crossval", &crossval, py::arg("table"), py::arg("architecture"),
          py::arg("train_config"), py::arg("k") = 5, py::arg("seed") = 42);

    py::class_<GradCheckReport>(m, "GradCheckReport")
        .def_readonly("layer", &GradCheckReport::layer)
        .def_readonly("configs", &GradCheckReport::configs)
        .def_readonly("max_rel_error", &GradCheckReport::max_rel_error)
        .def_readonly("pass_", &GradCheckReport::pass);
    m.def("gradcheck", &run_gradcheck, py::arg("seeds") = 50, py::arg("tolerance") = 1e-4);
}
