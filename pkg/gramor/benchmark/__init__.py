from gramor.benchmark.heat import HeatBenchmarkSpec, generate_heat_system
