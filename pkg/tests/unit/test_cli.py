"""Unit tests for CLI interface."""

from pathlib import Path
from unittest.mock import MagicMock, patch

import click
import pytest
from click.testing import CliRunner

from geotomo.cli import main, parse_lambda_values
from geotomo.errors import PreconditionError, TrainingDivergedError
from geotomo.models import DecoderMode, GradMethod


def touch_datasets() -> tuple[str, str]:
    Path("train.jsonl").touch()
    Path("val.jsonl").touch()
    return "train.jsonl", "val.jsonl"


def config_of(mock_orchestrator: MagicMock):
    """RunConfig the CLI passed to ExperimentOrchestrator."""
    return mock_orchestrator.call_args[0][0]


class TestCLIVersionAndHelp:
    """Test CLI version and help flags."""

    def test_version_flag(self) -> None:
        """Test --version flag displays version information."""
        result = CliRunner().invoke(main, ["--version"])

        assert result.exit_code == 0
        assert "geotomo" in result.output
        assert "0.1.0" in result.output

    def test_help_lists_commands(self) -> None:
        """Test --help lists every subcommand."""
        result = CliRunner().invoke(main, ["--help"])

        assert result.exit_code == 0
        for command in ("generate", "train", "analyze", "sweep-lambda"):
            assert command in result.output

    def test_unknown_option_exits_with_one(self) -> None:
        """Test that usage errors exit with code 1."""
        result = CliRunner().invoke(main, ["generate", "--quality", "95"])
        assert result.exit_code == 1

    def test_missing_input_file_exits_with_one(self) -> None:
        """Test that a nonexistent dataset path is a usage error."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(main, ["train", "missing.jsonl", "also_missing.jsonl"])
        assert result.exit_code == 1


class TestGenerateCommand:
    """Test the generate subcommand."""

    @patch("geotomo.cli.display_generate_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_options_reach_config(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """Test that generate flags become RunConfig fields."""
        monkeypatch.delenv("GEOTOMO_SEED", raising=False)
        runner = CliRunner()
        with runner.isolated_filesystem():
            result = runner.invoke(
                main,
                [
                    "generate",
                    "--n-train", "40",
                    "--n-val", "10",
                    "--purity-min", "0.9",
                    "--purity-max", "0.92",
                    "--workers", "2",
                    "--seed", "7",
                    "-o", "out",
                ],
            )

        assert result.exit_code == 0, result.output
        config = config_of(mock_orchestrator)
        assert (config.n_train, config.n_val) == (40, 10)
        assert config.purity_range == (0.9, 0.92)
        assert config.parallel_workers == 2
        assert config.seed == 7
        assert config.output_dir == Path("out")
        mock_orchestrator.return_value.generate.assert_called_once()
        mock_display.assert_called_once()

    @patch("geotomo.cli.display_generate_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_seed_from_environment(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
        monkeypatch: pytest.MonkeyPatch,
    ) -> None:
        """Test that GEOTOMO_SEED is used when --seed is absent."""
        monkeypatch.setenv("GEOTOMO_SEED", "12")
        result = CliRunner().invoke(main, ["generate"])

        assert result.exit_code == 0, result.output
        assert config_of(mock_orchestrator).seed == 12

    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_invalid_purity_range_exits_with_one(
        self, mock_setup_logging: MagicMock, mock_orchestrator: MagicMock
    ) -> None:
        """Test that a purity range below the maximally mixed value is refused."""
        result = CliRunner().invoke(main, ["generate", "--purity-min", "0.1"])

        assert result.exit_code == 1
        assert "Configuration error" in result.output
        mock_orchestrator.assert_not_called()

    @patch("geotomo.cli.display_generate_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_verbose_flag(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test that --verbose enables debug logging and shows the configuration."""
        result = CliRunner().invoke(main, ["--verbose", "generate"])

        assert result.exit_code == 0, result.output
        mock_setup_logging.assert_called_once_with(verbose=True)
        assert config_of(mock_orchestrator).verbose is True
        assert "Configuration" in result.output

    @patch("geotomo.cli.display_generate_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_config_file(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test that --config values apply and flags override them."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            Path("run.json").write_text('{"n-train": 30, "seed": 4}', encoding="utf-8")
            result = runner.invoke(main, ["--config", "run.json", "generate", "--seed", "8"])

        assert result.exit_code == 0, result.output
        config = config_of(mock_orchestrator)
        assert config.n_train == 30
        assert config.seed == 8


class TestTrainCommand:
    """Test the train subcommand."""

    @patch("geotomo.cli.display_train_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_training_options(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test hyperparameter flags and the dataset arguments."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(
                main,
                [
                    "train", train_file, val_file,
                    "--lambda-metric", "0",
                    "--epochs", "3",
                    "--batch-size", "16",
                    "--learning-rate", "0.01",
                    "--decoder", "literal",
                    "--grad-method", "finite-difference",
                ],
            )

        assert result.exit_code == 0, result.output
        config = config_of(mock_orchestrator)
        assert config.lambda_metric == 0.0
        assert config.epochs_max == 3
        assert config.batch_size == 16
        assert config.learning_rate == 0.01
        assert config.decoder is DecoderMode.LITERAL
        assert config.grad_method is GradMethod.FINITE_DIFFERENCE
        mock_orchestrator.return_value.train.assert_called_once_with(
            Path(train_file), Path(val_file)
        )

    @pytest.mark.parametrize(
        ("error", "exit_code", "message"),
        [
            (TrainingDivergedError("loss became nan"), 2, "Numerical failure during train"),
            (PreconditionError("empty dataset"), 1, "Invalid input for train"),
        ],
    )
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_failures_map_to_exit_codes(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        error: Exception,
        exit_code: int,
        message: str,
    ) -> None:
        """Test that numerical failures exit 2 and input failures exit 1."""
        mock_orchestrator.return_value.train.side_effect = error
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(main, ["train", train_file, val_file])

        assert result.exit_code == exit_code
        assert message in result.output

    def test_rejects_unknown_decoder(self) -> None:
        """Test that --decoder only accepts the two modes."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(main, ["train", train_file, val_file, "--decoder", "exact"])
        assert result.exit_code == 1


class TestAnalyzeCommand:
    """Test the analyze subcommand."""

    @patch("geotomo.cli.display_analyze_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_analysis_options(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test that pair and neighbor counts reach the configuration."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            Path("checkpoint.jsonl").touch()
            train_file, val_file = touch_datasets()
            result = runner.invoke(
                main,
                [
                    "analyze", "checkpoint.jsonl", train_file, val_file,
                    "--pairs", "100",
                    "--k-mle", "10",
                    "--k-curv", "12",
                ],
            )

        assert result.exit_code == 0, result.output
        config = config_of(mock_orchestrator)
        assert (config.n_pairs, config.k_mle, config.k_curv) == (100, 10, 12)
        mock_orchestrator.return_value.analyze.assert_called_once_with(
            Path("checkpoint.jsonl"), [Path(train_file), Path(val_file)]
        )

    def test_requires_a_dataset(self) -> None:
        """Test that at least one dataset argument is required."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            Path("checkpoint.jsonl").touch()
            result = runner.invoke(main, ["analyze", "checkpoint.jsonl"])
        assert result.exit_code == 1


class TestSweepLambdaCommand:
    """Test the sweep-lambda subcommand."""

    @patch("geotomo.cli.display_sweep_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_values_are_parsed(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test that --values becomes a list of floats."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(
                main, ["sweep-lambda", train_file, val_file, "--values", "0, 0.06"]
            )

        assert result.exit_code == 0, result.output
        mock_orchestrator.return_value.sweep_lambda.assert_called_once_with(
            [0.0, 0.06], Path(train_file), Path(val_file)
        )

    @patch("geotomo.cli.display_sweep_summary")
    @patch("geotomo.cli.ExperimentOrchestrator")
    @patch("geotomo.cli.setup_logging")
    def test_analysis_options_apply_to_every_run(
        self,
        mock_setup_logging: MagicMock,
        mock_orchestrator: MagicMock,
        mock_display: MagicMock,
    ) -> None:
        """Test that --pairs, --k-mle and --k-curv reach the sweep configuration."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(
                main,
                [
                    "sweep-lambda", train_file, val_file,
                    "--values", "0,0.06",
                    "--epochs", "2",
                    "--pairs", "100",
                    "--k-mle", "10",
                    "--k-curv", "12",
                ],
            )

        assert result.exit_code == 0, result.output
        config = config_of(mock_orchestrator)
        assert (config.n_pairs, config.k_mle, config.k_curv) == (100, 10, 12)
        assert config.epochs_max == 2

    def test_rejects_single_neighbor(self) -> None:
        """Test that --k-curv 1 is a usage error."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(
                main, ["sweep-lambda", train_file, val_file, "--values", "0", "--k-curv", "1"]
            )
        assert result.exit_code == 1

    @pytest.mark.parametrize("values", ["", " , ", "0,abc", "0.06,-1"])
    def test_invalid_values_exit_with_one(self, values: str) -> None:
        """Test that empty, non-numeric and negative lists are usage errors."""
        runner = CliRunner()
        with runner.isolated_filesystem():
            train_file, val_file = touch_datasets()
            result = runner.invoke(main, ["sweep-lambda", train_file, val_file, "--values", values])
        assert result.exit_code == 1


class TestParseLambdaValues:
    """Test the --values parser directly."""

    def test_parses_and_strips(self) -> None:
        """Test whitespace handling and float conversion."""
        assert parse_lambda_values(" 0 ,0.06,1e-1 ") == [0.0, 0.06, 0.1]

    def test_rejects_negative(self) -> None:
        """Test that negative weights raise BadParameter."""
        with pytest.raises(click.BadParameter):
            parse_lambda_values("-0.5")
