from __future__ import annotations

import inspect
from pathlib import Path
from typing import IO, TYPE_CHECKING, Any, Sequence, Union
import yaml
import yaml.constructor
import yaml.nodes

from .errors import ConfigError, IsoNystromError

if TYPE_CHECKING:
    _path_resolver_item = Union[str, int, None]


class Loader(yaml.SafeLoader):
    "Loader for run configurations; the document root is a `!run`"

    #: directory of the file being loaded, for resolving relative `!file` paths
    base_dir: Path | None = None


class GeometryLoader(yaml.SafeLoader):
    "Loader for geometry files; the document root is a `!geometry`"

    base_dir: Path | None = None


LOADERS: tuple[type[yaml.SafeLoader], ...] = (Loader, GeometryLoader)


def _initialise(o: Any, node: yaml.nodes.Node, *args, **kwargs):
    "Run __init__ on a constructed object, reporting domain errors with the node position"
    try:
        o.__init__(*args, **kwargs)
    except ConfigError:
        raise
    except IsoNystromError as e:
        raise ConfigError(f"{node.tag} at line {node.start_mark.line + 1}: {e}") from e


class YamlObject:
    def __init_subclass__(
        cls,
        yamltag: str | None = None,
        yamltags: Sequence[str] = [],
        path_resolver: Sequence[_path_resolver_item] | None = None,
        path_resolvers: Sequence[Sequence[_path_resolver_item]] = [],
        loader: type[yaml.SafeLoader] = Loader,
        **kwargs,
    ):
        super().__init_subclass__(**kwargs)
        yamltags = list(yamltags)
        if yamltag is not None:
            yamltags.insert(0, yamltag)
        for t in yamltags:
            for ldr in LOADERS:
                ldr.add_constructor(t, cls._constructor)

        path_resolvers = list(path_resolvers)
        if path_resolver is not None:
            path_resolvers.append(path_resolver)
        if path_resolvers and not yamltags:
            raise ValueError("Cannot have path_resolver with no yamltag")
        for p in path_resolvers:
            loader.add_path_resolver(yamltags[0], p, cls._node_kind)

    _node_kind: type | None = dict

    def __init__(self, **kwargs):
        pass

    @classmethod
    def _check_keys(cls, value: dict[str, Any], node: yaml.nodes.Node):
        params = inspect.signature(cls.__init__).parameters
        if any(p.kind is inspect.Parameter.VAR_KEYWORD for p in params.values()):
            return
        allowed = {k for k, p in params.items() if k != "self"}
        extra = [k for k in value if k not in allowed]
        if extra:
            raise ConfigError(
                f"{node.tag} at line {node.start_mark.line + 1}: unknown key(s) {', '.join(map(str, extra))}"
                f" (expected some of {', '.join(sorted(allowed))})")

    @classmethod
    def _constructor(
        cls,
        constructor: yaml.constructor.BaseConstructor,
        node: yaml.nodes.Node,
    ):
        if isinstance(node, yaml.nodes.MappingNode):
            # deep, so nested objects are initialised before this one validates them
            value: dict[str, Any] = constructor.construct_mapping(node, deep=True)
        else:
            raise yaml.constructor.ConstructorError(
                None, None,
                f"expected a mapping node, but found {node.id}",
                node.start_mark)
        cls._check_keys(value, node)
        o = cls.__new__(cls)
        yield o
        _initialise(o, node, **value)


class YamlScalar(YamlObject):
    _node_kind = str

    def __init__(self, data: str):
        pass

    @classmethod
    def _constructor(
        cls,
        constructor: yaml.constructor.BaseConstructor,
        node: yaml.nodes.Node,
    ):
        if isinstance(node, yaml.nodes.ScalarNode):
            value: str = str(constructor.construct_scalar(node))
        else:
            raise yaml.constructor.ConstructorError(
                None, None,
                f"expected a scalar node, but found {node.id}",
                node.start_mark)
        o = cls.__new__(cls)
        yield o
        o._base_dir = getattr(constructor, "base_dir", None)
        _initialise(o, node, value)


def _load(stream: str | bytes | IO[str] | IO[bytes], loader: type[yaml.SafeLoader], base_dir: Path | None) -> Any:
    ldr = loader(stream)
    ldr.base_dir = base_dir
    try:
        return ldr.get_single_data()
    except yaml.YAMLError as e:
        raise ConfigError(str(e)) from e
    finally:
        ldr.dispose()


def load(stream: str | bytes | IO[str] | IO[bytes], base_dir: Path | None = None) -> Any:
    return _load(stream, Loader, base_dir)


def load_geometry_data(stream: str | bytes | IO[str] | IO[bytes], base_dir: Path | None = None) -> Any:
    return _load(stream, GeometryLoader, base_dir)
