"""Command-line front end for feature extraction, tagging and training."""

from __future__ import annotations

import contextlib
from pathlib import Path

import click
import numpy as np

from . import encoders, features, formats, ner, training
from .errors import AdapterError


@contextlib.contextmanager
def _data_errors():
    """Translate data-level failures into exit code 1 with a clean message."""
    try:
        yield
    except AdapterError as exc:
        raise click.ClickException(str(exc)) from None
    except (KeyError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc)) from None


def _backend(name: str, encoder: str, dim: int | None, images_root: str | None):
    if name == "fake":
        return encoders.FakeBackend(dim=dim or encoders.ENCODER_DIMS[encoder])
    spec = encoders.EncoderSpec.from_name(encoder)
    if dim is not None and dim != spec.dim:
        raise click.ClickException(f"{encoder} is fixed at {spec.dim} dimensions")
    return encoders.ClipBackend(spec, images_root=images_root)


@click.group()
def main():
    """Feature extraction, entity tagging and detector training."""


@main.command("extract-embeddings")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--encoder", type=click.Choice(sorted(encoders.ENCODER_DIMS)), default="ViT-B/32", show_default=True)
@click.option("--backend", type=click.Choice(["clip", "fake"]), default="clip", show_default=True)
@click.option("--images-root", type=click.Path(file_okay=False), default=None, help="Directory image refs resolve against.")
@click.option("--dim", type=int, default=None, help="Override dimension (fake backend only).")
@click.option("--image-embeddings", "image_out", required=True, type=click.Path(dir_okay=False))
@click.option("--text-embeddings", "text_out", required=True, type=click.Path(dir_okay=False))
def extract_embeddings_cmd(corpus, encoder, backend, images_root, dim, image_out, text_out):
    """Encode corpus images and captions into two id-keyed stores."""
    with _data_errors():
        records = formats.read_corpus(corpus)
        be = _backend(backend, encoder, dim, images_root)
        count, out_dim = encoders.extract_embeddings(records, be, image_out, text_out)
    click.echo(f"encoded {count} records at dim {out_dim}")


@main.command("extract-entities")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", default=ner.DEFAULT_MODEL, show_default=True, help="Tagger model name, or 'heuristic' for the test double.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def extract_entities_cmd(corpus, model, out):
    """Tag captions and write the annotation file the swap engine reads."""
    with _data_errors():
        records = formats.read_corpus(corpus)
        backend = ner.HeuristicBackend() if model == "heuristic" else ner.SpacyBackend(model)
        annotations = ner.extract_entities(records, backend)
        formats.write_annotations(annotations, out)
    tagged = sum(1 for spans in annotations.values() if spans)
    click.echo(f"tagged {tagged} of {len(annotations)} captions")


@main.command("encode-captions")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--benchmark", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--encoder", type=click.Choice(sorted(encoders.ENCODER_DIMS)), default="ViT-B/32", show_default=True)
@click.option("--backend", type=click.Choice(["clip", "fake"]), default="clip", show_default=True)
@click.option("--dim", type=int, default=None, help="Override dimension (fake backend only).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def encode_captions_cmd(dataset, benchmark, encoder, backend, dim, out):
    """Encode dataset or benchmark captions into an ordinal-keyed store."""
    if (dataset is None) == (benchmark is None):
        raise click.UsageError("pass exactly one of --dataset or --benchmark")
    with _data_errors():
        if dataset is not None:
            texts = [r.caption for r in formats.read_dataset(dataset)]
        else:
            texts = [it.caption for it in formats.read_benchmark(benchmark)]
        be = _backend(backend, encoder, dim, None)
        count = encoders.encode_captions(texts, be, out)
    click.echo(f"encoded {count} captions")


@main.command("train")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-captions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--val-captions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--classes", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--modality", type=click.Choice(list(training.MODALITIES)), default="multimodal", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-epochs", type=click.IntRange(1, 30), default=30, show_default=True)
@click.option("--batch-size", type=click.IntRange(1), default=512, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint file for the best model.")
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default=None, help="Write the per-config training log as JSON.")
def train_cmd(train_path, val_path, image_embeddings, train_captions, val_captions, classes, modality, seed, max_epochs, batch_size, out, log_path):
    """Run the 16-configuration sweep and save the best checkpoint."""
    classes = int(classes)
    with _data_errors():
        train_rows = formats.read_dataset(train_path)
        val_rows = formats.read_dataset(val_path)
        _, img_ids, img_matrix = formats.read_store(image_embeddings)
        _, tr_ids, tr_matrix = formats.read_store(train_captions)
        _, va_ids, va_matrix = formats.read_store(val_captions)
        train_split = features.assemble_split(train_rows, (img_ids, img_matrix), (tr_ids, tr_matrix), classes)
        val_split = features.assemble_split(val_rows, (img_ids, img_matrix), (va_ids, va_matrix), classes)
        grid = training.default_grid(
            classes=classes, modality=modality, seed=seed, max_epochs=max_epochs, batch_size=batch_size
        )

        def progress(log):
            click.echo(
                f"{log.config.label()}: best val {log.best_val_accuracy:.4f} "
                f"at epoch {log.best_epoch} ({len(log.epochs)} epochs)"
            )

        result = training.run_grid(train_split, val_split, grid=grid, progress=progress)
        training.save_checkpoint(result, out)
        if log_path is not None:
            Path(log_path).write_text(training.grid_log_json(result), encoding="utf-8")
    click.echo(
        f"best config {result.best_config.label()} "
        f"val accuracy {result.best_val_accuracy:.4f} -> {out}"
    )


@main.command("predict")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--benchmark", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image-embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--captions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def predict_cmd(checkpoint, benchmark, image_embeddings, captions, out):
    """Label benchmark items with a trained checkpoint."""
    with _data_errors():
        _, model = training.load_checkpoint(checkpoint)
        items = formats.read_benchmark(benchmark)
        _, img_ids, img_matrix = formats.read_store(image_embeddings)
        _, cap_ids, cap_matrix = formats.read_store(captions)
        image_rows, text_rows = features.assemble_inference(items, (img_ids, img_matrix), (cap_ids, cap_matrix))
        labels, scores = training.predict(
            model,
            image_rows if model.image_proj is not None else None,
            text_rows if model.text_proj is not None else None,
        )
        rows = [(it.id, label, score) for it, label, score in zip(items, labels, np.asarray(scores))]
        formats.write_predictions(rows, out)
    click.echo(f"wrote {len(rows)} predictions")


if __name__ == "__main__":
    main()
