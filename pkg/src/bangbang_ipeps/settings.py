from typing import Any, Dict, Literal, Optional, Type, get_type_hints
import os
import json
from pathlib import Path
import msgspec
from dotenv import load_dotenv

from .errors import ConfigError


__all__ = [
    "SettingsConfigDict",
    "BaseSettings",
    "NtuOptions",
    "BoundaryOptions",
    "OptimizerOptions",
    "RunConfig",
]


class SettingsConfigDict(msgspec.Struct):
    env_file: Optional[str] = None
    env_file_encoding: str = "utf-8"
    case_sensitive: bool = False
    env_prefix: str = ""
    env_nested_delimiter: str = "__"

class NtuOptions(msgspec.Struct, forbid_unknown_fields=True):
    """Alternating least-squares controls of the bond truncation."""
    sweeps: int = 100
    tol: float = 1e-12
    pinv_cutoff: float = 1e-12
    memory_budget_bytes: int = 2 * 1024**3

class BoundaryOptions(msgspec.Struct, forbid_unknown_fields=True):
    """Tolerances of the boundary-MPS power method.

    Attributes:
        eig_tol: residual tolerance of every channel eigensolver
        compress_tol: per-site overlap change that stops one compression
        compress_max_iter: cap on center/isometry updates per compression
        tol: eigenvalue and spectrum drift that stops the row iteration
        max_iter: cap on row applications
        seed: seed of the random initial isometries
    """
    eig_tol: float = 1e-12
    compress_tol: float = 1e-10
    compress_max_iter: int = 200
    tol: float = 1e-10
    max_iter: int = 500
    seed: int = 0

class OptimizerOptions(msgspec.Struct, forbid_unknown_fields=True):
    max_evals: int = 2000
    xtol: float = 1e-6
    ftol: float = 1e-9
    mesh0: float = 0.1
    mesh_min: float = 1e-4
    contraction: float = 0.5
    expansion: float = 2.0
    taint_threshold: float = 1e-4
    workers: int = 1

class BaseSettings:
    model_config: SettingsConfigDict = SettingsConfigDict()

    def __init__(self, **values: Any):
        self._load_env_files()
        self._fields = self._get_fields_info()
        env_vars = self._get_env_vars()
        # explicit values (config file, command line) win over the environment
        final_values = {**env_vars, **{k: v for k, v in values.items() if v is not None}}
        unknown = set(final_values) - set(self._fields)
        if unknown:
            raise ConfigError(f"Unknown configuration field(s): {', '.join(sorted(unknown))}")
        self._validate_and_set_values(final_values)

    @classmethod
    def _load_env_files(cls):
        """Loads environment variables from the configured .env file, if any."""
        if cls.model_config.env_file:
            env_path = Path(cls.model_config.env_file)
            if env_path.exists():
                load_dotenv(
                    dotenv_path=env_path,
                    encoding=cls.model_config.env_file_encoding
                )

    @classmethod
    def _annotations(cls) -> Dict[str, Any]:
        hints = get_type_hints(cls)
        hints.pop("model_config", None)
        return {name: typ for name, typ in hints.items() if not name.startswith("_")}

    def _get_env_vars(self) -> Dict[str, Any]:
        """Collects the environment variables that map onto declared fields."""
        env_vars = {}

        for field_name, field_type in self._annotations().items():
            env_name = self._get_env_name(field_name)
            env_value = os.environ.get(env_name)

            if env_value is not None:
                try:
                    env_vars[field_name] = self._convert_env_value(env_value, field_type)
                except (ValueError, json.JSONDecodeError, msgspec.DecodeError) as e:
                    raise ConfigError(
                        f"Error parsing environment variable {env_name}: {str(e)}"
                    )
            elif self._is_struct(field_type):
                nested = self._get_nested_env_vars(env_name, field_type)
                if nested:
                    env_vars[field_name] = nested

        return env_vars

    def _get_nested_env_vars(self, env_name: str, struct_type: Type) -> Dict[str, Any]:
        """Reads PREFIX_FIELD__LEAF variables for a nested Struct field."""
        delimiter = self.model_config.env_nested_delimiter
        nested = {}
        for leaf in msgspec.inspect.type_info(struct_type).fields:
            leaf_name = leaf.name if self.model_config.case_sensitive else leaf.name.upper()
            value = os.environ.get(f"{env_name}{delimiter}{leaf_name}")
            if value is not None:
                try:
                    nested[leaf.name] = msgspec.json.decode(value.encode())
                except msgspec.DecodeError:
                    nested[leaf.name] = value
        return nested

    def _get_fields_info(self) -> Dict[str, Any]:
        """Collects type and default information for every declared field."""
        fields = {}
        for field_name, field_type in self._annotations().items():
            has_default = hasattr(self.__class__, field_name)
            fields[field_name] = {
                "type": field_type,
                "name": field_name,
                "has_default": has_default,
                "default": getattr(self.__class__, field_name, None),
            }
        return fields

    def _get_env_name(self, field_name: str) -> str:
        """Builds the environment variable name of a field."""
        name = field_name
        if not self.model_config.case_sensitive:
            name = name.upper()
        if self.model_config.env_prefix:
            name = f"{self.model_config.env_prefix}{name}"
        return name

    @staticmethod
    def _is_struct(field_type: Type) -> bool:
        try:
            return isinstance(msgspec.inspect.type_info(field_type), msgspec.inspect.StructType)
        except Exception:
            return False

    def _convert_env_value(self, value: str, field_type: Type) -> Any:
        """Converts an environment string into a value msgspec can validate."""
        if field_type == bool:
            return value.lower() in ("true", "1", "t", "y", "yes")
        elif field_type == str:
            return value
        elif self._is_struct(field_type):
            return msgspec.json.decode(value.encode(), type=field_type)
        # numbers, lists and optionals are JSON literals; anything else stays a string
        try:
            return msgspec.json.decode(value.encode())
        except msgspec.DecodeError:
            return value

    def _get_field_default(self, field_name: str) -> Any:
        default = self._fields[field_name]["default"]
        if isinstance(default, msgspec.Struct):
            return msgspec.structs.replace(default)
        return default

    def _validate_and_set_values(self, values: Dict[str, Any]):
        """Validates every field with msgspec and sets it on the instance."""
        for field_name, field_info in self._fields.items():
            if field_name in values:
                value = values[field_name]
            elif field_info["has_default"]:
                value = self._get_field_default(field_name)
            else:
                raise ConfigError(f"Missing required field: {field_name}")

            if isinstance(value, msgspec.Struct):
                value = msgspec.to_builtins(value)
            try:
                validated_value = msgspec.convert(value, field_info["type"])
            except msgspec.ValidationError as e:
                raise ConfigError(
                    f"Validation error for field {field_name}: {str(e)}"
                )
            setattr(self, field_name, validated_value)

        self.validate()
        self._schema = self._generate_schema()

    def validate(self) -> None:
        """Cross-field checks; subclasses override."""

    def _generate_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                field_name: msgspec.json.schema(field_info["type"])
                for field_name, field_info in self._fields.items()
            },
            "required": [
                field_name for field_name, field_info in self._fields.items()
                if not field_info["has_default"]
            ],
        }

    def model_dump(self) -> Dict[str, Any]:
        """Returns the settings as builtin types."""
        return {
            field_name: msgspec.to_builtins(getattr(self, field_name))
            for field_name in self._fields
            if hasattr(self, field_name)
        }

    def model_dump_json(self) -> str:
        return msgspec.json.encode(self.model_dump()).decode()

    def schema(self) -> Dict[str, Any]:
        return self._schema

class RunConfig(BaseSettings):
    """Configuration shared by every command.

    Defaults reproduce the published setting: g=3.1, D=8, chi=40.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="BANGBANG_",
    )

    g: float = 3.1
    J: float = 1.0
    g_c: float = 3.04438
    variant: Literal["para_target", "para_to_ferro"] = "para_target"
    N: int = 2
    D_max: int = 8
    chi: int = 40
    seed: int = 0
    threads: Optional[int] = None
    out: str = "runs"
    log_level: str = "INFO"
    ntu: NtuOptions = NtuOptions()
    boundary: BoundaryOptions = BoundaryOptions()
    optimizer: OptimizerOptions = OptimizerOptions()

    def validate(self) -> None:
        if self.J != 1.0:
            raise ConfigError("Validation error for field J: the coupling is fixed to J=1")
        if self.N < 1:
            raise ConfigError("Validation error for field N: depth must be >= 1")
        if self.D_max < 1:
            raise ConfigError("Validation error for field D_max: must be >= 1")
        if self.chi < 1:
            raise ConfigError("Validation error for field chi: must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("Validation error for field threads: must be >= 1")

    @property
    def field(self) -> float:
        """Gate coefficient of the H1 layers for the configured variant."""
        return self.g if self.variant == "para_target" else self.g_c

    @classmethod
    def from_file(cls, path: Optional[str], **overrides: Any) -> "RunConfig":
        """Reads a JSON config document; keyword overrides win over the file."""
        values: Dict[str, Any] = {}
        if path is not None:
            try:
                values = msgspec.json.decode(Path(path).read_bytes())
            except (OSError, msgspec.DecodeError) as e:
                raise ConfigError(f"Cannot read config file {path}: {e}")
            if not isinstance(values, dict):
                raise ConfigError(f"Config file {path} must hold a JSON object")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
