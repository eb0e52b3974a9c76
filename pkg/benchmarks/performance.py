"""Performance benchmarking for the potential, stability and flow kernels."""

import time
from statistics import mean, median, stdev
from typing import Callable, List

import numpy as np

from src.flow.gradient_flow import FlowOptions, step
from src.geometry.tessellation import tessellate
from src.models.shapes import Ball, PerturbedBall, ShapeSpec
from src.potential.newtonian import kernel_matrix, nonlocal_energy, potential_field
from src.stability.second_variation import assemble
from src.stability.spectrum import spectrum


class PerformanceBenchmark:
    """Benchmark the dominant numerical operations on desk-scale meshes."""

    def __init__(self, level: int = 3):
        self.ball = tessellate(ShapeSpec(Ball(), resolution=level))
        self.perturbed = tessellate(ShapeSpec(PerturbedBall(amplitudes={(2, 0): 0.15}), resolution=level))
        self.latencies: dict[str, List[float]] = {
            "potential_field": [],
            "nonlocal_energy": [],
            "kernel_matrix": [],
            "spectrum": [],
            "flow_step": [],
        }

    def _time(self, name: str, work: Callable[[], object], repeats: int) -> None:
        for _ in range(repeats):
            start = time.perf_counter()
            work()
            end = time.perf_counter()
            self.latencies[name].append((end - start) * 1_000)  # milliseconds

    def benchmark_potential(self, repeats: int = 10):
        """Benchmark vertex potentials and the double boundary integral."""
        print(f"\nBenchmarking potential on {self.ball.n_vertices} vertices ({repeats} runs)...")
        self._time("potential_field", lambda: potential_field(self.ball), repeats)
        self._time("nonlocal_energy", lambda: nonlocal_energy(self.ball), repeats)
        self._print_stats("Potential Field", self.latencies["potential_field"])
        self._print_stats("Nonlocal Energy", self.latencies["nonlocal_energy"])

    def benchmark_stability(self, repeats: int = 5, gamma: float = 1.0):
        """Benchmark kernel assembly and the constrained eigensolve."""
        print(f"\nBenchmarking stability assembly ({repeats} runs, gamma={gamma})...")
        self._time("kernel_matrix", lambda: kernel_matrix(self.ball), repeats)
        sv = assemble(self.ball, gamma)
        self._time("spectrum", lambda: spectrum(sv, k=10), repeats)
        self._print_stats("Kernel Matrix", self.latencies["kernel_matrix"])
        self._print_stats("Spectrum", self.latencies["spectrum"])

    def benchmark_flow(self, steps: int = 20, gamma: float = 0.1):
        """Benchmark single flow steps from a perturbed ball."""
        print(f"\nBenchmarking flow steps ({steps} steps, gamma={gamma})...")
        opts = FlowOptions()
        b = self.perturbed
        for _ in range(steps):
            start = time.perf_counter()
            b = step(b, gamma, opts)
            end = time.perf_counter()
            self.latencies["flow_step"].append((end - start) * 1_000)
        self._print_stats("Flow Step", self.latencies["flow_step"])

    def _print_stats(self, name: str, latencies: List[float]):
        """Print statistics for a benchmark."""
        if not latencies:
            print(f"\n  No data collected for {name}")
            return

        print(f"\n  {name} Latency Statistics (milliseconds):")
        print(f"    Count: {len(latencies):,}")
        print(f"    Mean: {mean(latencies):.2f} ms")
        print(f"    Median: {median(latencies):.2f} ms")
        print(f"    Min: {min(latencies):.2f} ms")
        print(f"    Max: {max(latencies):.2f} ms")
        if len(latencies) > 1:
            print(f"    Std Dev: {stdev(latencies):.2f} ms")
        print(f"    P95: {np.percentile(latencies, 95):.2f} ms")
        print(f"    P99: {np.percentile(latencies, 99):.2f} ms")

    def run_all_benchmarks(self):
        """Run all benchmarks."""
        print("=" * 70)
        print("NONLOCAL ISOPERIMETRIC PERFORMANCE BENCHMARK")
        print("=" * 70)

        self.benchmark_potential()
        self.benchmark_stability()
        self.benchmark_flow()

        print("\n" + "=" * 70)
        print("BENCHMARK COMPLETE")
        print("=" * 70)


if __name__ == "__main__":
    benchmark = PerformanceBenchmark()
    benchmark.run_all_benchmarks()
