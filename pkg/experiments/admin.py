from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("subcommand", "seed", "status", "threads", "runtime_seconds", "created_at")
    list_filter = ("subcommand", "status")
    search_fields = ("error",)
    readonly_fields = ("config", "manifest", "outputs", "code_version", "created_at", "finished_at")
