"""
Training loop with early stopping, evaluation metrics and embedding export.
"""
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO
import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from ember_news.config import TrainConfig
from ember_news.data import EmbeddingTable, EncodedBatch, NewsItem, split_dataset
from ember_news.errors import EmptyInputError, NonFiniteError, TrainingDiverged
from ember_news.forensics import ImageFeature
from ember_news.model import Ember, ForwardResult, joint_loss
from ember_news.numerics.optim import AdamState, adam_step
from ember_news.numerics.params import ParamStore
from ember_news.utils import get_thread_count


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    val_precision: float
    val_recall: float
    val_f1: float


class EvalSummary(BaseModel):
    """Header of an evaluation report; `averaging` names how P/R/F1 were averaged."""
    accuracy: float
    precision: float
    recall: float
    f1: float
    tn: int
    fp: int
    fn: int
    tp: int
    loss: float
    averaging: str
    threshold: float
    count: int


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tn: int
    fp: int
    fn: int
    tp: int
    loss: float
    averaging: str
    threshold: float
    ids: list[str]
    labels: NDArray[np.int64]
    probabilities: NDArray[np.float64]

    @property
    def count(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def predictions(self) -> NDArray[np.int64]:
        return predict_labels(self.probabilities, self.threshold)

    def summary(self) -> EvalSummary:
        return EvalSummary(
            accuracy=self.accuracy, precision=self.precision, recall=self.recall, f1=self.f1,
            tn=self.tn, fp=self.fp, fn=self.fn, tp=self.tp,
            loss=self.loss, averaging=self.averaging, threshold=self.threshold, count=self.count)

    def predictions_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "id": self.ids,
            "label": self.labels,
            "probability": self.probabilities,
            "predicted": self.predictions,
        })


@dataclass
class TrainResult:
    model: Ember
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    history: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False
    splits: tuple[list[NewsItem], list[NewsItem], list[NewsItem]] | None = None


def predict_labels(probabilities: NDArray[np.float64], threshold: float=0.5) -> NDArray[np.int64]:
    """Real (1) iff G_gru ≥ threshold; a tie counts as real."""
    return (probabilities >= threshold).astype(np.int64)


def compute_metrics(
        labels: NDArray[np.int64],
        probabilities: NDArray[np.float64],
        threshold: float=0.5,
        averaging: str="weighted",
        ids: Sequence[str] | None=None,
        loss: float=float("nan")) -> EvalReport:
    """Accuracy plus precision/recall/F1 averaged over both classes by `averaging`."""
    if len(labels) == 0:
        raise EmptyInputError("cannot evaluate an empty split")
    predicted = predict_labels(probabilities, threshold)
    precision, recall, f1, _ = precision_recall_fscore_support(
        labels, predicted, labels=[0, 1], average=averaging, zero_division=0)
    (tn, fp), (fn, tp) = confusion_matrix(labels, predicted, labels=[0, 1])
    return EvalReport(
        accuracy=float(accuracy_score(labels, predicted)),
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        tn=int(tn), fp=int(fp), fn=int(fn), tp=int(tp),
        loss=loss,
        averaging=averaging,
        threshold=threshold,
        ids=list(ids) if ids is not None else [str(i) for i in range(len(labels))],
        labels=np.asarray(labels, dtype=np.int64),
        probabilities=np.asarray(probabilities, dtype=np.float64))


def batches(items: Sequence[NewsItem], size: int) -> list[Sequence[NewsItem]]:
    return [items[start:start + size] for start in range(0, len(items), size)]


def evaluate(
        model: Ember,
        items: Sequence[NewsItem],
        features: Mapping[str, ImageFeature],
        dtype: type | None=None,
        on_batch: Callable[[EncodedBatch, ForwardResult], None] | None=None) -> EvalReport:
    """
    Score a split against a read-only model. Batches run on a thread pool
    (EMBER_THREADS); results are gathered in input order and no RNG is used.
    """
    if not items:
        raise EmptyInputError("cannot evaluate an empty split")
    scorer = model if dtype is None else model.astype(dtype)
    chunks = batches(items, model.config.batch_size)

    def score(chunk: Sequence[NewsItem]) -> tuple[NDArray[np.float64], float]:
        batch = scorer.encode(chunk, features)
        result = scorer.forward(batch)
        if on_batch is not None:
            on_batch(batch, result)
        loss = joint_loss(result.G_gru, result.G_R, batch.labels, model.config.lam).item()
        return result.probabilities(), loss * len(chunk)

    if on_batch is None and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=get_thread_count()) as pool:
            scored = list(pool.map(score, chunks))
    else:
        scored = [score(chunk) for chunk in chunks]

    probabilities = np.concatenate([probs for probs, _ in scored])
    loss = sum(total for _, total in scored) / len(items)
    labels = np.array([item.label for item in items], dtype=np.int64)
    return compute_metrics(
        labels, probabilities,
        threshold=model.config.threshold,
        averaging=model.config.averaging,
        ids=[item.id for item in items],
        loss=loss)


def train_step(model: Ember, batch: EncodedBatch, state: AdamState) -> float:
    """One Adam update on the joint loss of a batch; returns the batch loss."""
    store = model.store
    store.zero_grads()
    binding = store.bind(requires_grad=True)
    loss = model.loss(batch, binding)
    loss.backward()
    binding.accumulate_grads()
    adam_step(store, state)
    return loss.item()


def _write_record(log: IO[str] | None, record: EpochRecord):
    if log is None:
        return
    _ = log.write(record.model_dump_json() + "\n")
    log.flush()


def fit(
        train_items: Sequence[NewsItem],
        val_items: Sequence[NewsItem],
        config: TrainConfig,
        embeddings: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        log_path: str | Path | None=None,
        verbose: bool=False) -> TrainResult:
    """
    Shuffled mini-batch Adam on the joint loss. After every epoch the
    validation loss is measured; the best-scoring parameters are kept and
    training stops once `patience` epochs pass without improvement.
    """
    if not train_items:
        raise EmptyInputError("empty training split")
    if not val_items:
        raise EmptyInputError("empty validation split")

    model = Ember.initialise(config, embeddings, image_width)
    state = AdamState(lr=config.lr)
    shuffle_rng = np.random.default_rng([config.seed, 1])

    best_store: ParamStore = model.store.copy()
    best_val = float("inf")
    best_epoch = 0
    history: list[EpochRecord] = []
    stopped_early = False

    def snapshot() -> TrainResult:
        best = Ember(config, embeddings, image_width, best_store.copy())
        return TrainResult(best, best_epoch, best_val, len(history), list(history))

    log = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            perm = shuffle_rng.permutation(len(train_items))
            total = 0.0
            for start in range(0, len(perm), config.batch_size):
                chunk = [train_items[i] for i in perm[start:start + config.batch_size]]
                batch = model.encode(chunk, features)
                try:
                    loss = train_step(model, batch, state)
                except NonFiniteError as e:
                    raise TrainingDiverged(f"epoch {epoch}: {e.message}", result=snapshot(), where=e.where)
                total += loss * len(chunk)
            train_loss = total / len(train_items)

            try:
                report = evaluate(model, val_items, features)
            except NonFiniteError as e:
                raise TrainingDiverged(f"epoch {epoch}: {e.message}", result=snapshot(), where=e.where)
            if not np.isfinite(report.loss):
                raise TrainingDiverged(f"epoch {epoch}: validation loss is {report.loss}", result=snapshot(), where="validation")

            record = EpochRecord(
                epoch=epoch, train_loss=train_loss, val_loss=report.loss, val_acc=report.accuracy,
                val_precision=report.precision, val_recall=report.recall, val_f1=report.f1)
            history.append(record)
            _write_record(log, record)
            if verbose:
                print(f"epoch {epoch:3d}: train_loss={train_loss:.4f} val_loss={report.loss:.4f} val_acc={report.accuracy:.4f}")

            if report.loss < best_val:
                best_val = report.loss
                best_epoch = epoch
                best_store = model.store.copy()
            elif config.patience is not None and epoch - best_epoch >= config.patience:
                stopped_early = True
                if verbose:
                    print(f"early stop: no improvement since epoch {best_epoch}")
                break
    finally:
        if log is not None:
            log.close()

    model.store.load_from(best_store)
    return TrainResult(model, best_epoch, best_val, len(history), history, stopped_early)


def train(
        items: Sequence[NewsItem],
        config: TrainConfig,
        embeddings: EmbeddingTable,
        features: Mapping[str, ImageFeature],
        image_width: int,
        log_path: str | Path | None=None,
        verbose: bool=False) -> TrainResult:
    """Split the corpus by the configured ratios and seed, then fit on train/val."""
    splits = split_dataset(items, config.split_spec())
    result = fit(splits[0], splits[1], config, embeddings, features, image_width, log_path=log_path, verbose=verbose)
    result.splits = splits
    return result


def export_embeddings(
        model: Ember,
        items: Sequence[NewsItem],
        features: Mapping[str, ImageFeature]) -> pd.DataFrame:
    """One row per item: id, label and the 32-bit Fea_gru vector."""
    if not items:
        raise EmptyInputError("nothing to export")
    scorer = model.astype(np.float32)
    rows: list[NDArray[np.float32]] = []
    for chunk in batches(items, model.config.batch_size):
        rows.append(scorer.forward(scorer.encode(chunk, features)).fea_gru.data.astype(np.float32))
    matrix = np.concatenate(rows)
    frame = pd.DataFrame(matrix, columns=[f"f{i}" for i in range(matrix.shape[1])])
    frame.insert(0, "label", [item.label for item in items])
    frame.insert(0, "id", [item.id for item in items])
    return frame
