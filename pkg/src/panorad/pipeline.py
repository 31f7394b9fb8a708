"""End-to-end pipelines tying descriptors, codebooks, classifiers, and reports.

Two model families share one container format and one report layout:

* bag-of-words — dense local descriptors, a k-means codebook, locality-
  constrained encoding, spatial-pyramid max pooling, then k-NN or pairwise
  SVM over the pooled vectors;
* convolutional — the small 4-layer stack or the 16-layer stack trained
  directly on resized pixels.

Every run is deterministic for a fixed (inputs, config, seed) triple in
single-threaded mode; thread pools only map pure per-item work.
"""

import dataclasses
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classic import (
    BinarySvm,
    EcocModel,
    KernelSpec,
    KnnModel,
    ecoc_predict,
    ecoc_train,
    knn_predict,
)
from .codebook import (
    Codebook,
    KMeansConfig,
    LlcConfig,
    PyramidConfig,
    feature_dim,
    kmeans_elkan,
    llc_encode,
    pool_pyramid,
    sample_descriptors,
)
from .config import PipelineConfig, config_from_dict
from .container import ModelContainer, load_container, save_container
from .errors import ConfigError, DataError
from .evaluation import (
    ConfusionMatrix,
    confusion_accumulate,
    fold_split,
    kfold_plan,
    matrix_metrics,
    write_confusion_csv,
    write_metrics_csv,
)
from .features import GridSpec, color_names, dense_sift, hog
from .image_io import (
    AugmentConfig,
    GrayImage,
    RgbImage,
    read_image,
    resize_bilinear,
    to_gray,
    to_rgb,
)
from .manifest import class_names, read_manifest
from .nn import InitSpec, Network, build_4layer, build_16layer
from .nn.train import evaluate_accuracy, train as train_network
from .plots import save_confusion_plot, save_curve_plot, save_history_plot

SIFT_GRID = GridSpec(patch=16, stride=8)
HOG_CELL = 8
COLOR_GRIDS = (GridSpec(8, 4), GridSpec(16, 8), GridSpec(24, 12))

SWEEP_AXES = ("dictionary_m", "input_size", "pyramid_levels", "train_size")
DEFAULT_SWEEP_VALUES = {
    "dictionary_m": tuple(range(100, 1001, 100)),
    "input_size": (32, 64, 128, 256),
    "pyramid_levels": (0, 1, 2, 3),
    "train_size": (0.25, 0.5, 0.75, 1.0),
}

BOW_CLASSIFIERS = ("knn", "ecoc_svm")
CNN_CLASSIFIERS = ("cnn4", "cnn16")


# ---------------------------------------------------------------------------
# Image loading and descriptor extraction
# ---------------------------------------------------------------------------


def load_gray(path, input_size):
    """Read any supported image, collapse to gray, resize to a square."""
    img = read_image(path)
    if isinstance(img, RgbImage):
        img = to_gray(img)
    if (img.width, img.height) != (input_size, input_size):
        img = resize_bilinear(img, input_size, input_size)
    return img


def extract_descriptors(img: GrayImage, cfg: PipelineConfig):
    """Dense local descriptors for one image, per the configured kind."""
    if cfg.descriptor == "sift":
        return dense_sift(img, SIFT_GRID)
    if cfg.descriptor == "hog2x2":
        return hog(img, HOG_CELL, 2)
    if cfg.descriptor == "hog3x3":
        return hog(img, HOG_CELL, 3)
    return color_names(to_rgb(img), COLOR_GRIDS)


def _map_maybe_parallel(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def descriptor_sets_for(records, cfg: PipelineConfig, threads=1):
    return _map_maybe_parallel(
        lambda rec: extract_descriptors(load_gray(rec.path, cfg.input_size), cfg),
        records,
        threads,
    )


def pooled_feature(descriptor_set, codebook: Codebook, cfg: PipelineConfig):
    """Encode one image's descriptors and pool them into a single vector."""
    llc = LlcConfig(knn=cfg.llc_knn, beta=cfg.llc_beta)
    codes = [
        (cx, cy, llc_encode(vec, codebook, llc))
        for (cx, cy), vec in zip(descriptor_set.centers, descriptor_set.vectors)
    ]
    return pool_pyramid(codes, codebook.m, PyramidConfig(cfg.pyramid_levels))


def pooled_features_for(sets, codebook, cfg, threads=1):
    feats = _map_maybe_parallel(
        lambda s: pooled_feature(s, codebook, cfg), sets, threads
    )
    return np.stack(feats)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BowModel:
    config: PipelineConfig
    task: str
    classes: tuple
    codebook: Codebook
    classifier: object  # KnnModel or EcocModel

    @property
    def kind(self):
        return "knn" if isinstance(self.classifier, KnnModel) else "ecoc_svm"


@dataclass(frozen=True)
class CnnModel:
    config: PipelineConfig
    task: str
    classes: tuple
    net: Network


def _labels_of(records, classes):
    index = {name: i for i, name in enumerate(classes)}
    return np.array([index[rec.label] for rec in records], dtype=np.intp)


def _kernel_spec(cfg: PipelineConfig) -> KernelSpec:
    gamma = cfg.svm_gamma if cfg.svm_gamma > 0 else None
    return KernelSpec(kind=cfg.svm_kernel, gamma=gamma)


def train_bow(records, cfg: PipelineConfig, task, classes, threads=1) -> BowModel:
    sets = descriptor_sets_for(records, cfg, threads)
    sample = sample_descriptors(sets, cfg.sample_count, cfg.seed)
    if sample.shape[0] < cfg.dictionary_m:
        raise DataError(
            f"dictionary needs at least {cfg.dictionary_m} descriptors, "
            f"sampled only {sample.shape[0]}"
        )
    km = kmeans_elkan(
        sample,
        KMeansConfig(
            m=cfg.dictionary_m,
            max_iter=cfg.kmeans_max_iter,
            tol=cfg.kmeans_tol,
            seed=cfg.seed,
        ),
    )
    feats = pooled_features_for(sets, km.codebook, cfg, threads)
    y = _labels_of(records, classes)
    if cfg.classifier == "knn":
        clf = KnnModel(feats, y, k=min(cfg.knn_k, feats.shape[0]))
    else:
        clf = ecoc_train(feats, y, _kernel_spec(cfg), c=cfg.svm_c, threads=threads)
    return BowModel(cfg, task, tuple(classes), km.codebook, clf)


def _cnn_batch(records, cfg: PipelineConfig):
    imgs = [load_gray(rec.path, cfg.input_size).pixels for rec in records]
    return np.stack(imgs)[:, None].astype(np.float32)


def _build_net(cfg: PipelineConfig, n_classes):
    shape = (1, cfg.input_size, cfg.input_size)
    init = InitSpec(seed=cfg.seed)
    if cfg.classifier == "cnn4":
        return build_4layer(shape, n_classes, init=init)
    return build_16layer(shape, n_classes, width_scale=cfg.width_scale, init=init)


def train_cnn(records, cfg: PipelineConfig, task, classes,
              eval_records=None):
    x = _cnn_batch(records, cfg)
    y = _labels_of(records, classes)
    net = _build_net(cfg, len(classes))
    aug = AugmentConfig(mode=cfg.augment, seed=cfg.seed) \
        if cfg.augment != "none" else None
    eval_x = eval_y = None
    if eval_records:
        eval_x = _cnn_batch(eval_records, cfg)
        eval_y = _labels_of(eval_records, classes)
    history = train_network(
        net, x, y,
        loss_kind="categorical",
        opt_kind=cfg.optimizer,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
        augment_cfg=aug,
        eval_x=eval_x,
        eval_y=eval_y,
    )
    return CnnModel(cfg, task, tuple(classes), net), history


def train_model(records, cfg: PipelineConfig, task, classes, threads=1,
                eval_records=None):
    """(model, history-or-None) for any configured classifier."""
    if cfg.classifier in CNN_CLASSIFIERS:
        return train_cnn(records, cfg, task, classes, eval_records)
    return train_bow(records, cfg, task, classes, threads), None


def predict_model(model, records, threads=1):
    """Predicted class indices for manifest records."""
    if isinstance(model, CnnModel):
        x = _cnn_batch(records, model.config)
        out = np.concatenate(
            [model.net.predict(x[i:i + 64]) for i in range(0, len(x), 64)]
        )
        return out.argmax(axis=1) if out.shape[1] > 1 \
            else (out[:, 0] >= 0.5).astype(np.intp)
    sets = descriptor_sets_for(records, model.config, threads)
    feats = pooled_features_for(sets, model.codebook, model.config, threads)
    if isinstance(model.classifier, KnnModel):
        return np.array(
            [knn_predict(model.classifier, f) for f in feats], dtype=np.intp
        )
    return ecoc_predict(model.classifier, feats)


def model_accuracy(model, records, threads=1):
    pred = predict_model(model, records, threads)
    y = _labels_of(records, model.classes)
    return float((np.asarray(pred) == y).mean())


# ---------------------------------------------------------------------------
# Container serialization
# ---------------------------------------------------------------------------


def model_to_container(model) -> ModelContainer:
    cfg_dict = dataclasses.asdict(model.config)
    meta = {
        "task": model.task,
        "classes": list(model.classes),
        "config": cfg_dict,
    }
    if isinstance(model, CnnModel):
        tensors = {}
        for i, params in enumerate(model.net.params):
            for name, value in params.items():
                tensors[f"l{i:02d}_{name}"] = value
        return ModelContainer(module="cnn", header=meta, tensors=tensors)

    tensors = {"codebook": model.codebook.centers}
    clf = model.classifier
    if isinstance(clf, KnnModel):
        meta["knn_k"] = clf.k
        tensors["knn_x"] = clf.train_x
        tensors["knn_y"] = clf.train_y
    else:
        meta["ecoc_classes"] = [int(c) for c in clf.classes]
        gamma = clf.learners[0].kernel.gamma
        meta["svm_gamma_resolved"] = None if gamma is None else float(gamma)
        meta["learner_count"] = len(clf.learners)
        tensors["coding"] = clf.coding
        tensors["svm_bias"] = np.array([m.bias for m in clf.learners])
        for i, m in enumerate(clf.learners):
            tensors[f"svm{i:03d}_x"] = m.support_x
            tensors[f"svm{i:03d}_ay"] = m.alpha_y
    return ModelContainer(module="bow", header=meta, tensors=tensors)


def model_from_container(container: ModelContainer):
    meta = container.header
    cfg = config_from_dict(meta["config"])
    task = meta["task"]
    classes = tuple(meta["classes"])
    if container.module == "cnn":
        net = _build_net(cfg, len(classes))
        for i, params in enumerate(net.params):
            for name in params:
                stored = container.tensor(f"l{i:02d}_{name}")
                if stored.shape != params[name].shape:
                    raise DataError(
                        f"tensor l{i:02d}_{name} has shape {stored.shape}, "
                        f"expected {params[name].shape}"
                    )
                params[name] = stored.astype(net.dtype)
        return CnnModel(cfg, task, classes, net)
    if container.module != "bow":
        raise DataError(f"unknown model module {container.module!r}")

    codebook = Codebook(container.tensor("codebook").astype(np.float64))
    if cfg.classifier == "knn":
        clf = KnnModel(
            container.tensor("knn_x").astype(np.float64),
            container.tensor("knn_y").astype(np.intp),
            k=int(meta["knn_k"]),
        )
    else:
        gamma = meta.get("svm_gamma_resolved")
        kernel = KernelSpec(kind=cfg.svm_kernel, gamma=gamma)
        biases = container.tensor("svm_bias").astype(np.float64)
        learners = tuple(
            BinarySvm(
                container.tensor(f"svm{i:03d}_x").astype(np.float64),
                container.tensor(f"svm{i:03d}_ay").astype(np.float64),
                float(biases[i]),
                kernel,
                cfg.svm_c,
            )
            for i in range(int(meta["learner_count"]))
        )
        clf = EcocModel(
            container.tensor("coding").astype(np.int8),
            learners,
            np.array(meta["ecoc_classes"], dtype=np.intp),
        )
    return BowModel(cfg, task, classes, codebook, clf)


def save_model(model, path):
    save_container(model_to_container(model), path)


def load_model(path):
    return model_from_container(load_container(path))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _summary_dim(model):
    if isinstance(model, CnnModel):
        return f"{model.net.param_count()} parameters"
    return f"{feature_dim(model.codebook.m, PyramidConfig(model.config.pyramid_levels))}-dim features"


def run_extract(manifest_path, cfg: PipelineConfig, out_dir, threads=1, log=print):
    """Per-image descriptor containers plus an index CSV; fails on bad files."""
    man = read_manifest(manifest_path)
    desc_dir = os.path.join(out_dir, "descriptors")
    os.makedirs(desc_dir, exist_ok=True)
    failures = []
    rows = []
    for i, rec in enumerate(man.records):
        try:
            ds = extract_descriptors(load_gray(rec.path, cfg.input_size), cfg)
        except (DataError, ConfigError) as exc:
            failures.append(f"{rec.path}: {exc}")
            log(f"[{i + 1}/{len(man)}] {rec.path}: FAILED ({exc})")
            continue
        fname = f"desc_{i:05d}.pnc"
        save_container(
            ModelContainer(
                module="descriptors",
                header={
                    "source": rec.path,
                    "descriptor": cfg.descriptor,
                    "input_size": cfg.input_size,
                },
                tensors={"centers": ds.centers, "vectors": ds.vectors},
            ),
            os.path.join(desc_dir, fname),
        )
        rows.append((rec.path, fname, len(ds), ds.dim))
        log(f"[{i + 1}/{len(man)}] {rec.path}: {len(ds)} x {ds.dim}")
    index_path = os.path.join(out_dir, "index.csv")
    with open(index_path, "w", newline="") as fh:
        fh.write("path,file,count,dim\n")
        for path, fname, count, dim in rows:
            fh.write(f"{path},{fname},{count},{dim}\n")
    if failures:
        raise DataError(
            f"{len(failures)} of {len(man)} images failed: " + "; ".join(failures)
        )
    return index_path


def run_train(manifest_path, cfg: PipelineConfig, out_dir, threads=1, log=print):
    """Train on the manifest's train split and write the model container."""
    man = read_manifest(manifest_path)
    classes = class_names(man.task)
    train_records = man.split("train")
    if not train_records:
        raise DataError("manifest has no train-split rows")
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    model, history = train_model(
        train_records, cfg, man.task, classes, threads,
        eval_records=man.split("test") or None,
    )
    train_acc = model_accuracy(model, train_records, threads)
    elapsed = time.perf_counter() - t0
    model_path = os.path.join(out_dir, "model.pnc")
    save_model(model, model_path)
    if history is not None:
        history.write_csv(os.path.join(out_dir, "history.csv"))
        save_history_plot(os.path.join(out_dir, "history.png"), history)
    log(f"task: {man.task} ({len(classes)} classes)")
    log(f"model: {cfg.classifier}, {_summary_dim(model)}")
    log(f"train accuracy: {train_acc:.4f}")
    log(f"wall time: {elapsed:.2f}s")
    log(f"model written: {model_path}")
    return model_path


def _write_reports(out_dir, stem, cm, names):
    rows, _ = matrix_metrics(cm)
    write_metrics_csv(os.path.join(out_dir, f"metrics{stem}.csv"), rows, names)
    write_confusion_csv(os.path.join(out_dir, f"confusion{stem}.csv"), cm, names)


def run_eval(manifest_path, model_path, out_dir, kfold=None, threads=1, log=print):
    """Score a model (or k-fold retrain it) and write report CSVs + figures."""
    man = read_manifest(manifest_path)
    model = load_model(model_path)
    if model.task != man.task:
        raise DataError(
            f"task mismatch: model is for {model.task!r}, manifest is {man.task!r}"
        )
    classes = model.classes
    os.makedirs(out_dir, exist_ok=True)

    if kfold is not None:
        plan = kfold_plan(man.records, kfold, seed=model.config.seed)
        pooled = ConfusionMatrix(len(classes))
        pred_rows = []
        for fold in range(plan.k):
            train_idx, val_idx = fold_split(man.records, plan, fold)
            train_records = [man.records[i] for i in train_idx]
            val_records = [man.records[i] for i in val_idx]
            fold_model, _ = train_model(
                train_records, model.config, man.task, classes, threads
            )
            pred = np.asarray(predict_model(fold_model, val_records, threads))
            truth = _labels_of(val_records, classes)
            cm = ConfusionMatrix(len(classes))
            for t, p in zip(truth, pred):
                confusion_accumulate(cm, int(t), int(p))
            _write_reports(out_dir, f"_fold{fold + 1:02d}", cm, classes)
            pooled.merge(cm)
            pred_rows += [
                (rec.path, rec.label, classes[p], 0.0)
                for rec, p in zip(val_records, pred)
            ]
            log(f"fold {fold + 1}/{plan.k}: accuracy {cm.accuracy:.4f} "
                f"({len(val_records)} images)")
        cm = pooled
    else:
        eval_records = man.split("test") or list(man.records)
        truth = _labels_of(eval_records, classes)
        t0 = time.perf_counter()
        pred = np.asarray(predict_model(model, eval_records, threads))
        elapsed = time.perf_counter() - t0
        per_image = elapsed / len(eval_records)
        cm = ConfusionMatrix(len(classes))
        for t, p in zip(truth, pred):
            confusion_accumulate(cm, int(t), int(p))
        pred_rows = [
            (rec.path, rec.label, classes[p], per_image)
            for rec, p in zip(eval_records, pred)
        ]
        log(f"classified {len(eval_records)} images in {elapsed:.2f}s")

    _write_reports(out_dir, "", cm, classes)
    save_confusion_plot(os.path.join(out_dir, "confusion.png"), cm, classes)
    with open(os.path.join(out_dir, "predictions.csv"), "w", newline="") as fh:
        fh.write("path,label,predicted,seconds\n")
        for path, label, predicted, seconds in pred_rows:
            fh.write(f"{path},{label},{predicted},{seconds:.6f}\n")
    log(f"accuracy: {cm.accuracy:.4f}")
    return cm


def _sweep_config(cfg: PipelineConfig, axis, value):
    if axis == "train_size":
        return cfg
    return dataclasses.replace(cfg, **{axis: value})


def run_sweep(manifest_path, cfg: PipelineConfig, axis, values, out_dir,
              threads=1, log=print):
    """Accuracy over one hyperparameter axis; CSV plus a curve figure."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    man = read_manifest(manifest_path)
    classes = class_names(man.task)
    train_records = man.split("train")
    test_records = man.split("test")
    if not train_records:
        raise DataError("manifest has no train-split rows")
    if not test_records:
        raise DataError("manifest has no test-split rows")
    order = np.random.default_rng(cfg.seed).permutation(len(train_records))

    accs = []
    os.makedirs(out_dir, exist_ok=True)
    for value in values:
        if axis == "train_size":
            frac = float(value)
            if not 0.0 < frac <= 1.0:
                raise ConfigError(f"train_size values must be in (0, 1], got {value}")
            take = max(1, int(round(frac * len(train_records))))
            subset = [train_records[i] for i in order[:take]]
        else:
            subset = train_records
        run_cfg = _sweep_config(cfg, axis, value)
        model, _ = train_model(subset, run_cfg, man.task, classes, threads)
        pred = np.asarray(predict_model(model, test_records, threads))
        acc = float((pred == _labels_of(test_records, classes)).mean())
        accs.append(acc)
        log(f"{axis}={value}: accuracy {acc:.4f} ({len(subset)} train images)")

    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"{axis},accuracy\n")
        for value, acc in zip(values, accs):
            fh.write(f"{value},{acc:.4f}\n")
    save_curve_plot(
        os.path.join(out_dir, "sweep.png"),
        values,
        {cfg.classifier: accs},
        xlabel=axis.replace("_", " "),
    )
    return csv_path
