#!/usr/bin/env python3
"""
膜应力工具包冒烟测试脚本
对 configs/ 下的示例配置逐个运行命令, 检查退出码和输出文件
"""

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from main import main as run_cli  # noqa: E402

CONFIGS = ROOT / "configs"

# (名称, 子命令, 配置文件, 期望输出)
RUNS = [
    ("恒等式审计", "audit", "torus_audit.json", ["identity_report.json"]),
    ("应力与形状方程", "stress", "sphere_helfrich_stress.json", ["residual_norms.json", "stress.csv"]),
    ("圆柱面积", "energy", "cylinder_energy.json", ["energy.json", "density.csv"]),
    ("边界力", "force", "cylinder_force.json", ["force.json"]),
    ("悬链面梯度流", "flow", "catenoid_flow.json", ["flow_summary.json", "trajectory.csv", "final.obj"]),
]


def run_case(name: str, command: str, config: str, expected, out_root: Path) -> bool:
    """运行单个命令并检查输出"""
    print(f"\n🧮 {name} ({command} {config})...")
    out_dir = out_root / command

    exit_code = run_cli([command, "--config", str(CONFIGS / config), "--out", str(out_dir)])
    if exit_code != 0:
        print(f"❌ 退出码 {exit_code}")
        return False

    missing = [artifact for artifact in expected if not (out_dir / artifact).exists()]
    if missing:
        print(f"❌ 缺少输出文件: {missing}")
        return False

    manifest = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))
    print(f"✅ 完成: {', '.join(manifest['outputs'])}")
    return True


def main() -> int:
    """主测试函数"""
    print("🧪 开始冒烟测试 membrane stress toolkit")
    print("=" * 50)

    passed = 0
    with tempfile.TemporaryDirectory(prefix="membrane-smoke-") as tmp:
        for name, command, config, expected in RUNS:
            try:
                if run_case(name, command, config, expected, Path(tmp)):
                    passed += 1
            except Exception as e:
                print(f"❌ {name}测试异常: {e}")

    print("\n" + "=" * 50)
    print(f"🎯 测试结果: {passed}/{len(RUNS)} 通过")

    if passed == len(RUNS):
        print("🎉 所有命令运行正常")
        return 0
    print("⚠️ 部分命令失败, 请查看日志")
    return 1


if __name__ == "__main__":
    sys.exit(main())
