#!/usr/bin/env python3
"""
Optimized QFI bound - quick start
This script walks through the closed-form bound, a small sweep and one oracle check
"""

import asyncio

from channel_math import cq_star, derive_params
from config import settings
from models import ProbeFamily, ProbeSpec, SweepSpec
from probe_stats import make_moments, moments
from storage import ResultStorageService
from sweep_service import SweepService
from verify_service import OracleService


async def main():
    """Example usage of the bound, sweep and oracle services"""

    print("=" * 60)
    print("Optimized QFI bound - Quick Start")
    print("=" * 60)

    try:
        # Closed form for a single-mode probe with <N> = Var(N) = 1
        print("\n1. Closed-form bound at eta=0.5, nbar_b=1...")
        p = derive_params(0.5, 1.0)
        result = cq_star(p, make_moments(1.0, 1.0))
        print(f"   C_Q* = {result.cq_star:.6f} at (x0, y0) = ({result.x0:.4f}, {result.y0:.4f})")
        print(f"   MSE lower bound = {result.mse_lower:.6f}")

        # Entangled coherent state, the default sweep probe
        ecs = ProbeSpec(family=ProbeFamily.entangled_coherent, amplitude=1.0, n_modes=2)
        ecs_moments = moments(ecs)
        print(f"\n2. ECS |alpha|=1: <N> = {ecs_moments.mean_total:.6f}, Var(N) = {ecs_moments.var_total:.6f}")

        storage_service = ResultStorageService(settings.golden_path)
        sweep_service = SweepService(storage_service)
        rows = await sweep_service.run_sweep(SweepSpec(etas=[0.4], nbar_stop=2.0, nbar_count=5, probe=ecs))
        print("\n3. Sweep over nbar_b at eta=0.4:")
        for row in rows:
            print(f"   nbar_b={row.nbar_b:.2f}  C_Q*={row.cq_star:.6f}")

        print("\n4. Exact QFI of a coherent probe through the same channel...")
        coherent = ProbeSpec(family=ProbeFamily.coherent, amplitude=1.0)
        oracle = await OracleService(settings).run_oracle(coherent, p, settings.dim)
        print(f"   F_Q = {oracle.f_q:.6f} <= C_Q* = {oracle.cq_star:.6f} (gap {oracle.gap:.3e})")

        print("\n" + "=" * 60)
        print("Quick start completed successfully!")
        print("=" * 60)

    except Exception as e:
        print(f"\nError: {str(e)}")
        print("\nPlease ensure:")
        print("1. All required packages are installed: pip install -r requirements.txt")
        print("2. Any QFI_BOUND_* overrides in .env are valid")


if __name__ == "__main__":
    asyncio.run(main())
