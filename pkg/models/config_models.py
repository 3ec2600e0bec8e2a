"""
Config Models - 输入配置数据模型
定义曲面、网格、能量模型、曲线和梯度流的 JSON 配置格式
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.errors import ConfigurationError


class BoundaryCondition(str, Enum):
    """边界条件枚举"""
    PERIODIC = "periodic"
    CLAMPED = "clamped"


class SurfaceKind(str, Enum):
    """曲面目录"""
    SPHERE_BAND = "sphere_band"
    CYLINDER = "cylinder"
    CATENOID = "catenoid"
    TORUS = "torus"
    ELLIPSOID_BAND = "ellipsoid_band"
    GRAPH = "graph"


class Side(str, Enum):
    """边界力计算时保留的一侧"""
    BELOW = "below"
    ABOVE = "above"


# kind -> 默认参数；长度类参数必须严格为正
SURFACE_DEFAULTS: Dict[SurfaceKind, Dict[str, float]] = {
    SurfaceKind.SPHERE_BAND: {"R": 1.0, "theta0": 0.2},
    SurfaceKind.CYLINDER: {"rho": 1.0, "L": 1.0},
    SurfaceKind.CATENOID: {"c": 1.0, "L": 2.0},
    SurfaceKind.TORUS: {"R": math.sqrt(2.0), "r": 1.0},
    SurfaceKind.ELLIPSOID_BAND: {"a": 1.0, "b": 1.0, "c": 1.0, "theta0": 0.2},
    SurfaceKind.GRAPH: {"amplitude": 0.0, "lx": 1.0, "ly": 1.0},
}

UNSIGNED_PARAMS = {"amplitude"}


class GridConfig(BaseModel):
    """网格配置; bc/domain 缺省时取曲面类型的标准值"""
    n1: int = Field(..., description="方向1节点数")
    n2: int = Field(..., description="方向2节点数")
    bc1: Optional[BoundaryCondition] = Field(None, description="方向1边界条件")
    bc2: Optional[BoundaryCondition] = Field(None, description="方向2边界条件")
    domain: Optional[Tuple[float, float, float, float]] = Field(
        None, description="参数矩形 (u1_min, u1_max, u2_min, u2_max)"
    )

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={"example": {"n1": 64, "n2": 33, "bc1": "periodic", "bc2": "clamped"}}
    )


class SurfaceSpec(BaseModel):
    """曲面规格"""
    kind: SurfaceKind = Field(..., description="曲面类型")
    params: Dict[str, float] = Field(default_factory=dict, description="类型相关参数")
    grid: Optional[GridConfig] = Field(None, description="网格配置")

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "kind": "torus",
                "params": {"R": 1.4142135623730951, "r": 1.0},
                "grid": {"n1": 128, "n2": 128},
            }
        }
    )

    @model_validator(mode="after")
    def _resolve_params(self) -> "SurfaceSpec":
        defaults = SURFACE_DEFAULTS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind.value}: {sorted(unknown)}")

        resolved = {**defaults, **self.params}
        for name, value in resolved.items():
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite")
            if name in UNSIGNED_PARAMS or name == "theta0":
                continue
            if value <= 0.0:
                raise ValueError(f"parameter {name} must be strictly positive, got {value}")

        if "theta0" in resolved and not 0.0 < resolved["theta0"] < math.pi / 2:
            raise ValueError(f"band margin theta0 must lie in (0, pi/2), got {resolved['theta0']}")

        self.params = resolved
        return self

    def param(self, name: str) -> float:
        return float(self.params[name])


class EnergyTerm(BaseModel):
    """能量密度单项 c * I1^p * I2^q"""
    c: float = Field(..., description="系数")
    p: int = Field(0, ge=0, description="I1 = K 的幂")
    q: int = Field(0, ge=0, description="I2 = K_ab K^ab 的幂")


class EnergyModel(BaseModel):
    """哈密顿密度模型: H = sum c_pq I1^p I2^q"""
    name: str = Field("custom", description="模型名称")
    terms: List[EnergyTerm] = Field(..., description="多项式项")

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "examples": [
                {"preset": "helfrich", "alpha": 1.0, "mu": 0.5},
                {"terms": [{"c": 1.0, "p": 2, "q": 0}]},
            ]
        }
    )

    @model_validator(mode="before")
    @classmethod
    def _expand_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and "preset" in data:
            return _preset_terms(data)
        return data

    @field_validator("terms")
    @classmethod
    def _unique_powers(cls, terms: List[EnergyTerm]) -> List[EnergyTerm]:
        if not terms:
            raise ValueError("energy model needs at least one term")
        seen = set()
        for term in terms:
            key = (term.p, term.q)
            if key in seen:
                raise ValueError(f"duplicate term powers (p={term.p}, q={term.q})")
            if not math.isfinite(term.c):
                raise ValueError("term coefficients must be finite")
            seen.add(key)
        return terms

    @classmethod
    def soap_film(cls, mu: float) -> "EnergyModel":
        return cls(name="soap_film", terms=[EnergyTerm(c=mu, p=0, q=0)])

    @classmethod
    def willmore(cls, alpha: float) -> "EnergyModel":
        return cls(name="willmore", terms=[EnergyTerm(c=alpha, p=2, q=0)])

    @classmethod
    def helfrich(cls, alpha: float, mu: float) -> "EnergyModel":
        return cls(name="helfrich", terms=[EnergyTerm(c=alpha, p=2, q=0), EnergyTerm(c=mu, p=0, q=0)])

    @classmethod
    def sigma_model(cls, alpha: float) -> "EnergyModel":
        """alpha * (grad n)^2 = alpha * K_ab K^ab"""
        return cls(name="sigma_model", terms=[EnergyTerm(c=alpha, p=0, q=1)])

    @classmethod
    def gaussian(cls, kappa_bar: float) -> "EnergyModel":
        """kappa_bar * Gaussian curvature = kappa_bar * (K^2 - K_ab K^ab) / 2"""
        return cls(
            name="gaussian",
            terms=[EnergyTerm(c=0.5 * kappa_bar, p=2, q=0), EnergyTerm(c=-0.5 * kappa_bar, p=0, q=1)],
        )

    @property
    def depends_on_curvature(self) -> bool:
        return any(term.p or term.q for term in self.terms)

    @classmethod
    def from_config(cls, data: Dict[str, Any]) -> "EnergyModel":
        return cls.model_validate(data)

    def describe(self) -> str:
        body = " + ".join(f"{t.c:g}*I1^{t.p}*I2^{t.q}" for t in self.terms)
        return f"{self.name}: {body}"


def _preset_terms(data: Dict[str, Any]) -> Dict[str, Any]:
    preset = data["preset"]
    extra = set(data) - {"preset", "alpha", "mu", "kappa_bar"}
    if extra:
        raise ValueError(f"unexpected keys for preset {preset}: {sorted(extra)}")

    def need(key: str) -> float:
        if key not in data:
            raise ValueError(f"preset {preset} requires '{key}'")
        return float(data[key])

    if preset == "soap_film":
        terms = [{"c": need("mu"), "p": 0, "q": 0}]
    elif preset == "willmore":
        terms = [{"c": need("alpha"), "p": 2, "q": 0}]
    elif preset == "helfrich":
        terms = [{"c": need("alpha"), "p": 2, "q": 0}, {"c": need("mu"), "p": 0, "q": 0}]
    elif preset == "sigma_model":
        terms = [{"c": need("alpha"), "p": 0, "q": 1}]
    elif preset == "gaussian":
        kappa_bar = need("kappa_bar")
        terms = [{"c": 0.5 * kappa_bar, "p": 2, "q": 0}, {"c": -0.5 * kappa_bar, "p": 0, "q": 1}]
    else:
        raise ValueError(f"unknown preset: {preset}")
    return {"name": preset, "terms": terms}


class CurveSpec(BaseModel):
    """网格对齐的闭合坐标曲线"""
    model_config = ConfigDict(extra="forbid")

    direction: int = Field(1, ge=1, le=2, description="曲线沿其延伸的参数方向")
    index: int = Field(..., ge=0, description="另一方向上的固定节点索引")
    retain: Side = Field(Side.BELOW, description="保留区域位于曲线哪一侧")


class FlowConfig(BaseModel):
    """梯度流配置"""
    model: Optional[EnergyModel] = Field(None, description="能量模型 (缺省取运行配置的 model)")
    dt0: float = Field(1e-4, gt=0.0, description="初始步长")
    max_steps: int = Field(1000, ge=0, description="最大步数")
    tol: float = Field(1e-4, gt=0.0, description="max|eps| 停止阈值")
    dt_shrink: float = Field(0.5, gt=0.0, lt=1.0, description="能量上升时的步长缩减因子")
    smooth_every: int = Field(0, ge=0, description="切向光顺周期 (0 关闭)")
    smooth_weight: float = Field(0.25, gt=0.0, le=0.25, description="切向光顺松弛系数")
    record_every: int = Field(1, ge=1, description="轨迹记录周期")
    energy_rtol: float = Field(
        1e-12, ge=0.0, description="能量比较的相对舍入容差: 接受的步可使能量上升至多 energy_rtol*|E| (0 为严格单调)"
    )
    probe_scale: float = Field(1e-3, gt=0.0, description="下降符号探针幅度 (相对最小节点间距)")
    clamp_edges: bool = Field(True, description="固定 clamped 方向的边界环")
    clamp_rows: Optional[int] = Field(
        None, ge=0, description="边界环内侧额外固定的行数 (缺省: 曲率模型固定差分模板光晕, 肥皂膜为 0)"
    )
    clamp_nodes: List[Tuple[int, int]] = Field(default_factory=list, description="额外固定节点")

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {"dt0": 1e-4, "max_steps": 5000, "tol": 1e-3, "dt_shrink": 0.5, "smooth_every": 0}
        }
    )


class NodePerturbation(BaseModel):
    """采样后对单个节点施加的位移 (故障注入)"""
    model_config = ConfigDict(extra="forbid")

    node: Tuple[int, int] = Field(..., description="节点 (i1, i2)")
    displacement: Tuple[float, float, float] = Field(..., description="位移向量")


OUTPUT_FORMATS = ("json", "csv", "obj")


class RunConfig(BaseModel):
    """一次命令运行的完整配置"""
    model_config = ConfigDict(extra="forbid")

    surface: SurfaceSpec = Field(..., description="曲面与网格")
    model: Optional[EnergyModel] = Field(None, description="能量模型")
    curve: Optional[CurveSpec] = Field(None, description="force 命令的曲线")
    flow: Optional[FlowConfig] = Field(None, description="flow 命令的梯度流配置")
    perturbation: Optional[NodePerturbation] = Field(None, description="采样嵌入的单节点扰动")
    tol: Optional[float] = Field(None, gt=0.0, description="审计容差")
    formats: List[str] = Field(default_factory=lambda: list(OUTPUT_FORMATS), description="输出格式")
    output_dir: Optional[str] = Field(None, description="输出目录")

    @field_validator("formats")
    @classmethod
    def _known_formats(cls, formats: List[str]) -> List[str]:
        unknown = [f for f in formats if f not in OUTPUT_FORMATS]
        if unknown:
            raise ValueError(f"unknown output formats: {unknown}")
        return formats

    def require_model(self) -> EnergyModel:
        if self.model is None:
            raise ConfigurationError("this command requires a 'model' entry", {"key": "model"})
        return self.model

    def require_curve(self) -> CurveSpec:
        if self.curve is None:
            raise ConfigurationError("this command requires a 'curve' entry", {"key": "curve"})
        return self.curve
