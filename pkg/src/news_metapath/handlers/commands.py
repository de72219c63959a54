"""
Обработчики подкоманд командной строки
"""

import argparse
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__
from ..config.settings import Settings, write_config
from ..errors import NewsMetapathError, PreconditionError
from ..graph.featurize import FeatureBundle, bind, hash_features, load_features
from ..graph.hetgraph import HeteroGraph, NodeType, load_graph
from ..model.network import MetaPathNetwork, embed
from ..services import reports
from ..services.evaluation import (
    ablate_encoder,
    ablate_temporal,
    evaluate_network,
    evaluate_repeated,
    export_embeddings,
    probe_logreg,
    sweep_training_ratio,
)
from ..services.synthgen import describe, generate, write_synthetic
from ..services.trainer import Split, Trainer, eval_seed, split_dataset

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_digest(path: Path) -> str:
    """SHA-256 содержимого файла"""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Описание запуска, записываемое в каждый выходной каталог"""

    command: str
    """Подкоманда"""

    config_hash: str
    """Хэш полной конфигурации"""

    seeds: dict[str, int]
    """Корневые зёрна обучения и генератора"""

    inputs: dict[str, str] = field(default_factory=dict)
    """Входной файл -> SHA-256"""

    outputs: list[str] = field(default_factory=list)
    """Записанные файлы"""

    version: str = __version__
    """Версия пакета"""

    started_at: str = field(default_factory=_now)
    finished_at: str | None = None

    def write(self, out_dir: Path) -> Path:
        self.finished_at = _now()
        path = out_dir / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


class CommandHandlers:
    """Выполнение подкоманд поверх сервисов"""

    def __init__(self, settings: Settings, args: argparse.Namespace):
        """
        Args:
            settings: Настройки после слияния файла и флагов
            args: Разобранные аргументы командной строки
        """
        self.settings = settings
        self.args = args
        self.out_dir = Path(args.out) if getattr(args, "out", None) else None
        self.manifest = RunManifest(
            command=args.command,
            config_hash=settings.config_hash(),
            seeds={"train": settings.train.seed, "synth": settings.synth.seed},
        )

    # --- общие шаги

    def _output(self, name: str) -> Path:
        path = self._require_out() / name
        self.manifest.outputs.append(name)
        return path

    def _track(self, path: Path) -> None:
        self.manifest.inputs[str(path)] = file_digest(path)

    def load_corpus(self) -> tuple[HeteroGraph, FeatureBundle]:
        """
        Граф и признаки из --graph и --features-dir

        Для типа без файла признаков строятся хэшированные признаки
        идентификаторов узлов.
        """
        if not self.args.graph:
            raise PreconditionError(f"{self.args.command} needs --graph")
        graph_path = Path(self.args.graph)
        graph = load_graph(graph_path)
        self._track(graph_path)

        features_dir = Path(self.args.features_dir) if self.args.features_dir else None
        synth = self.settings.synth
        fallback_dims = {
            NodeType.PUBLISHER: synth.publisher_dim,
            NodeType.NEWS: synth.news_dim,
            NodeType.USER: synth.user_dim,
        }
        tables = []
        for node_type in sorted(graph.node_types_present()):
            path = features_dir / f"{node_type.value}.csv" if features_dir else None
            if path is not None and path.is_file():
                tables.append(load_features(path, node_type))
                self._track(path)
                continue
            logger.warning(
                f"No feature file for {node_type.value} nodes; hashing node ids"
            )
            texts = {node_id: node_id for node_id in graph.nodes(node_type)}
            tables.append(
                hash_features(
                    texts, fallback_dims[node_type], self.settings.train.seed, node_type
                )
            )
        return graph, bind(graph, tables)

    def load_network(self) -> MetaPathNetwork:
        if not self.args.checkpoint:
            raise PreconditionError(f"{self.args.command} needs --checkpoint")
        path = Path(self.args.checkpoint)
        network = MetaPathNetwork.load(path)
        self._track(path)
        return network

    def finish(self) -> Path:
        """Запись манифеста"""
        if self.out_dir is None:
            raise PreconditionError("no output directory for the manifest")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.manifest.write(self.out_dir)
        logger.info(f"Run finished; outputs in {self.out_dir}")
        return path

    # --- подкоманды

    def handle_synth(self) -> None:
        """Генерация синтетического корпуса"""
        config = self.settings.synth
        graph, bundle = generate(config)
        written = write_synthetic(self._require_out(), graph, bundle)
        self.manifest.outputs.extend(str(p.relative_to(self.out_dir)) for p in written)
        write_config(self._output("synth.cfg"), describe(config))

    def _require_out(self) -> Path:
        if self.out_dir is None:
            raise PreconditionError(f"{self.args.command} needs --out")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir

    def _split(self, graph: HeteroGraph) -> Split:
        train = self.settings.train
        return split_dataset(graph.labels, train.train_frac, train.seed)

    def handle_train(self) -> None:
        """Обучение и сохранение лучшей контрольной точки"""
        graph, bundle = self.load_corpus()
        split = self._split(graph)
        result = Trainer(self.settings.model, self.settings.train).train(
            graph, bundle, split
        )
        result.network.save(self._output("checkpoint.json"))
        reports.write_history(self._output("history.csv"), result.history)

    def handle_eval(self) -> None:
        """
        Метрики контрольной точки на тестовой части или, без --checkpoint,
        повторные запуски с полуширинами интервалов
        """
        graph, bundle = self.load_corpus()
        settings = self.settings
        config_hash = self.manifest.config_hash
        if not self.args.checkpoint:
            summary = evaluate_repeated(
                graph,
                bundle,
                settings.model,
                settings.train,
                settings.eval.runs,
                settings.eval.threshold,
            )
            run_ids = [str(seed) for seed in summary.seeds]
            reports.write_metrics(
                self._output("metrics.csv"), summary.runs, config_hash, run_ids
            )
            reports.write_summary(self._output("summary.csv"), summary)
            return

        network = self.load_network()
        split = self._split(graph)
        seed = settings.train.seed
        batch_size = settings.train.batch_size
        report = evaluate_network(
            network,
            graph,
            bundle,
            split.test,
            seed,
            settings.eval.threshold,
            batch_size,
        )
        prediction = embed(
            network,
            graph,
            bundle,
            split.train + split.test,
            eval_seed(seed),
            batch_size,
        )
        probe = probe_logreg(
            prediction.as_dict(),
            graph.labels,
            _restrict(split, set(prediction.ids)),
            seed,
            settings.eval.probe_l2,
            settings.eval.threshold,
        )
        reports.write_metrics(
            self._output("metrics.csv"),
            [report, probe],
            config_hash,
            ["classifier", "probe_logreg"],
        )

    def handle_ablate_temporal(self) -> None:
        """GRU против внимания на пути через пользователей"""
        graph, bundle = self.load_corpus()
        s = self.settings
        ablation = ablate_temporal(
            graph, bundle, self._split(graph), s.model, s.train, s.eval.threshold
        )
        arms = ablation.arms()
        config_hash = self.manifest.config_hash
        reports.write_arms(self._output("temporal.csv"), arms, config_hash)
        reports.write_curves(self._output("curves.csv"), arms)

    def handle_ablate_encoder(self) -> None:
        """Сравнение трёх кодировщиков"""
        graph, bundle = self.load_corpus()
        s = self.settings
        arms = ablate_encoder(
            graph, bundle, self._split(graph), s.model, s.train, s.eval.threshold
        )
        config_hash = self.manifest.config_hash
        reports.write_arms(self._output("encoders.csv"), arms, config_hash)
        reports.write_curves(self._output("curves.csv"), arms)

    def handle_sweep_ratio(self) -> None:
        """Развёртка по доле обучающей выборки"""
        graph, bundle = self.load_corpus()
        s = self.settings
        rows = sweep_training_ratio(
            graph, bundle, s.eval.ratios, s.model, s.train, s.eval.threshold
        )
        reports.write_sweep(self._output("sweep.csv"), rows)

    def handle_export_emb(self) -> None:
        """Экспорт представлений всех новостей"""
        graph, bundle = self.load_corpus()
        network = self.load_network()
        train = self.settings.train
        prediction = embed(
            network,
            graph,
            bundle,
            graph.nodes(NodeType.NEWS),
            eval_seed(train.seed),
            train.batch_size,
        )
        export_embeddings(
            prediction.as_dict(), self._output("embeddings.csv"), graph.labels
        )

    def dispatch(self) -> None:
        """Выполнение подкоманды и запись манифеста"""
        handler = getattr(self, "handle_" + self.args.command.replace("-", "_"), None)
        if handler is None:
            raise NewsMetapathError(f"unknown command {self.args.command!r}")
        handler()
        self.finish()


def _restrict(split: Split, kept: set[str]) -> Split:
    """Разбиение без пропущенных изолированных новостей"""
    return Split(
        train=[n for n in split.train if n in kept],
        val=[n for n in split.val if n in kept],
        test=[n for n in split.test if n in kept],
        seed=split.seed,
    )
